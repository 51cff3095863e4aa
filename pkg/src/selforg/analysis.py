"""Structure and spectral analysis of self-organized arrays."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.cluster.vq import kmeans2

from .dynamics import NumericalError
from .greens import K0, _projector, _radial_kernels, as_dipole, coupling_matrix
from .model import Z_DIPOLE

HBAR = 1.054571817e-34


def nearest_neighbour_couplings(x, d=Z_DIPOLE):
    """Coherent couplings J between consecutive atoms of a chain along x."""
    gaps = np.diff(np.asarray(x, dtype=float))
    q = _projector(as_dipole(d))[0, 0]
    a, b, _, _ = _radial_kernels(np.abs(gaps))
    return (a + b * q).real


def dimer_strength(x=None, d=Z_DIPOLE, couplings=None):
    """Alternating normalized contrast of nearest-neighbour |J|.

    Positive for fully paired chains, negative when the edge atoms are
    unpaired, zero for a uniform chain. Pass ``couplings`` (N-1 values) to
    bypass the geometry.
    """
    if couplings is None:
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[:, 0]
        if x.size < 3:
            raise ValueError("dimer strength needs at least 3 atoms")
        if np.any(np.diff(x) <= 0):
            raise ValueError("positions must be sorted along the chain")
        couplings = nearest_neighbour_couplings(x, d)
    j = np.abs(np.asarray(couplings, dtype=float))
    if j.size < 2:
        raise ValueError("dimer strength needs at least 3 atoms")
    n_terms = j.size - 1
    sign = (-1.0) ** np.arange(1, n_terms + 1)
    return float(np.mean(sign * (j[1:] - j[:-1]) / (j[1:] + j[:-1])))


class ChainKind(str, enum.Enum):
    UNIFORM = "uniform"
    DIMERIZED = "dimerized"
    OTHER = "other"


@dataclass(frozen=True)
class ChainClassification:
    kind: ChainKind
    gaps: np.ndarray
    a_final: float | None = None
    a_strong: float | None = None
    a_weak: float | None = None
    dimer_strength: float | None = None


def classify_chain(x, d=Z_DIPOLE, uniform_tol=0.02, contrast=0.05):
    """Label a chain Uniform, Dimerized (perfectly alternating gaps) or Other."""
    x = np.sort(np.asarray(x, dtype=float)[:, 0] if np.ndim(x) == 2 else np.asarray(x, dtype=float))
    if x.size < 3:
        raise ValueError("classification needs at least 3 atoms")
    gaps = np.diff(x)
    ds = dimer_strength(x, d)
    if np.std(gaps) / np.mean(gaps) < uniform_tol:
        return ChainClassification(ChainKind.UNIFORM, gaps, a_final=float(np.mean(gaps)), dimer_strength=ds)
    labels = _two_means(gaps)
    centers = np.array([gaps[labels == k].mean() for k in (0, 1)])
    alternating = np.all(labels[1:] != labels[:-1])
    if alternating and abs(centers[0] - centers[1]) > contrast * centers.mean():
        return ChainClassification(
            ChainKind.DIMERIZED, gaps, a_strong=float(centers.min()), a_weak=float(centers.max()),
            dimer_strength=ds,
        )
    return ChainClassification(ChainKind.OTHER, gaps, dimer_strength=ds)


def _two_means(values):
    # deterministic seeding at the extremes keeps labels reproducible
    init = np.array([[values.min()], [values.max()]])
    _, labels = kmeans2(values[:, None], init, minit="matrix", iter=50)
    if np.unique(labels).size < 2:
        labels = (values > values.mean()).astype(int)
    return labels


def edge_cell(x):
    """Unit cell ``(a1, a2)`` as seen from the left end of a dimerized chain.

    ``a1`` averages the gaps at even bond index (the bond touching the edge
    atom) and ``a2`` the odd ones.
    """
    x = np.sort(np.asarray(x, dtype=float)[:, 0] if np.ndim(x) == 2 else np.asarray(x, dtype=float))
    gaps = np.diff(x)
    if gaps.size < 2:
        raise ValueError("need at least 3 atoms")
    return float(gaps[0::2].mean()), float(gaps[1::2].mean())


def periodic_reference(x):
    """Perfectly dimerized chain with the same first atom and edge cell."""
    x = np.sort(np.asarray(x, dtype=float)[:, 0] if np.ndim(x) == 2 else np.asarray(x, dtype=float))
    a1, a2 = edge_cell(x)
    steps = np.where(np.arange(x.size - 1) % 2 == 0, a1, a2)
    return x[0] + np.concatenate([[0.0], np.cumsum(steps)])


def effective_hamiltonian(positions, d=Z_DIPOLE):
    """Non-Hermitian single-excitation Hamiltonian with ``-i/2`` on the diagonal."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = np.column_stack([positions, np.zeros_like(positions)])
    return coupling_matrix(positions, d, gradients=False).c


def ipr(vectors):
    """Inverse participation ratio of each column."""
    v = np.abs(np.asarray(vectors)) ** 2
    if v.ndim == 1:
        v = v[:, None]
    return np.sum(v**2, axis=0) / np.sum(v, axis=0) ** 2


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ipr: np.ndarray
    midgap_pair: tuple | None = None

    def edge_weight(self, index, sites=4):
        """Probability on the outer ``sites`` atoms (split over both ends)."""
        p = np.abs(self.eigenvectors[:, index]) ** 2
        p = p / p.sum()
        half = sites // 2
        return float(p[:half].sum() + p[-(sites - half):].sum())


def spectrum_ipr(h):
    """Dense eigendecomposition, per-state IPR and the mid-gap edge pair if any."""
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise NumericalError("Hamiltonian has non-finite entries")
    try:
        w, v = np.linalg.eig(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigensolver did not converge") from exc
    order = np.lexsort((w.imag, w.real))
    w, v = w[order], v[:, order]
    v = v / np.linalg.norm(v, axis=0)
    p = ipr(v)
    return SpectralReport(w, v, p, _midgap_pair(w, p))


def _midgap_pair(w, p, factor=3.0):
    if w.size < 3:
        return None
    mid = 0.5 * (w.real.max() + w.real.min())
    candidates = np.nonzero(p > factor * np.median(p))[0]
    if candidates.size < 2:
        return None
    closest = candidates[np.argsort(np.abs(w.real[candidates] - mid))[:2]]
    return tuple(sorted(int(i) for i in closest))


def _line_coupling_sum(dist, d, k=K0):
    q = _projector(as_dipole(d))[0, 0]
    a, b, _, _ = _radial_kernels(np.abs(dist), k)
    return a + b * q


def bloch_hamiltonian(k, a1, a2, d=Z_DIPOLE, cutoff_cells=100):
    """Two-site Bloch Hamiltonian of a dimerized chain along x.

    Site A sits at 0 and site B at ``a1``; the cell length is ``a1 + a2``.
    ``H_ab(k) = sum_c C(x_a - x_b - c L) exp(i k c L)`` over all terms with
    ``|x_a - x_b - c L| <= cutoff L``; truncating by distance keeps the sums
    symmetric under reflection.
    """
    if cutoff_cells < 10:
        raise ValueError("cutoff_cells must be at least 10")
    if a1 <= 0 or a2 <= 0:
        raise ValueError("separations must be positive")
    length = a1 + a2
    k = np.atleast_1d(np.asarray(k, dtype=float))
    cells = np.arange(-cutoff_cells - 1, cutoff_cells + 2)
    phase = np.exp(1j * np.outer(k, cells) * length)
    reach = cutoff_cells * length * (1 + 1e-12)

    def lattice_sum(offset, skip_origin=False):
        r = offset - cells * length
        keep = np.abs(r) <= reach
        if skip_origin:
            keep &= cells != 0
        terms = np.zeros(cells.size, complex)
        terms[keep] = _line_coupling_sum(r[keep], d)
        return phase @ terms

    h = np.empty((k.size, 2, 2), complex)
    h[:, 0, 0] = h[:, 1, 1] = lattice_sum(0.0, skip_origin=True) - 0.5j
    h[:, 0, 1] = lattice_sum(-a1)
    h[:, 1, 0] = lattice_sum(a1)
    return h[0] if h.shape[0] == 1 and np.ndim(k) == 1 and k.size == 1 else h


def default_k_grid(a1, a2, points=401):
    length = a1 + a2
    return np.linspace(-np.pi / length, np.pi / length, points)


@dataclass
class BandStructure:
    k: np.ndarray
    bands: np.ndarray
    gap: float
    converged: np.ndarray

    @property
    def gap_k(self):
        diff = np.where(self.converged, self.bands[:, 1].real - self.bands[:, 0].real, np.inf)
        return float(self.k[np.argmin(diff)])


def band_structure(a1, a2, d=Z_DIPOLE, k_grid=None, cutoff_cells=100, converge_tol=5e-3,
                   reference_cutoff=100):
    """Bands sorted by real part and the minimum direct gap ``min_k Re(l+ - l-)``.

    Near the light line the lattice sum diverges logarithmically. A k point
    counts towards the gap only if its Bloch matrix changes by less than
    ``converge_tol`` when ``reference_cutoff`` is doubled; the mask does not
    depend on ``cutoff_cells`` so gaps at different cutoffs are comparable.
    """
    k_grid = default_k_grid(a1, a2) if k_grid is None else np.asarray(k_grid, dtype=float)
    ref = bloch_hamiltonian(k_grid, a1, a2, d, reference_cutoff).reshape(-1, 2, 2)
    ref2 = bloch_hamiltonian(k_grid, a1, a2, d, 2 * reference_cutoff).reshape(-1, 2, 2)
    converged = np.max(np.abs(ref2 - ref), axis=(1, 2)) < converge_tol
    if not np.any(converged):
        raise NumericalError("lattice sums did not converge at any k point")
    if cutoff_cells == reference_cutoff:
        h = ref
    elif cutoff_cells == 2 * reference_cutoff:
        h = ref2
    else:
        h = bloch_hamiltonian(k_grid, a1, a2, d, cutoff_cells).reshape(-1, 2, 2)
    w = np.linalg.eigvals(h)
    w = np.take_along_axis(w, np.argsort(w.real, axis=1), axis=1)
    gap = float(np.min((w[:, 1].real - w[:, 0].real)[converged]))
    return BandStructure(k_grid, w, gap, converged)


def _band_vectors(hs, band_index, biorthogonal):
    """Right and left (dual) vectors of one band for a stack of 2x2 matrices."""
    w, v = np.linalg.eig(hs)
    order = np.argsort(w.real, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    if biorthogonal:
        right = v[:, :, band_index]
        left = np.linalg.inv(v)[:, band_index, :].conj()
    else:
        right = v[:, :, band_index] / np.linalg.norm(v[:, :, band_index], axis=1, keepdims=True)
        left = right
    return right, left


def _ray_distance(a, b):
    """Gauge-invariant ``1 - |<a|b>|^2`` for rows of ``a`` and ``b`` (normalized here)."""
    a = a / np.linalg.norm(a, axis=1, keepdims=True)
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    return 1.0 - np.abs(np.sum(a.conj() * b, axis=1)) ** 2


def zak_phase(a1, a2, d=Z_DIPOLE, k_grid=None, band_index=0, cutoff_cells=100, biorthogonal=True,
              hamiltonian=None, refine_tol=1e-7, max_refine=60):
    """Zak phase of one band from a discretized Wilson loop, in [0, 2 pi).

    ``k_grid`` must span one Brillouin zone; the endpoint is dropped if it
    repeats the start. Bands are ordered by the real part of the energy.
    Intervals across which the band's eigenvector rotates by more than
    ``refine_tol`` (in ``1 - |<u|v>|^2``) are bisected, since the folded
    light line makes the eigenvectors turn steeply over a narrow range of k.
    ``hamiltonian(k)`` may replace the dipolar Bloch Hamiltonian.
    """
    length = a1 + a2
    if k_grid is None:
        k_grid = np.linspace(-np.pi / length, np.pi / length, 401)
    k_grid = np.asarray(k_grid, dtype=float)
    period = 2 * np.pi / length if hamiltonian is None else k_grid[-1] - k_grid[0]
    if np.isclose(k_grid[-1] - k_grid[0], 2 * np.pi / length):
        period = k_grid[-1] - k_grid[0]
        k_grid = k_grid[:-1]
    if k_grid.size < 200:
        raise ValueError("need at least 200 k points")

    def matrices(ks):
        if hamiltonian is None:
            return bloch_hamiltonian(ks, a1, a2, d, cutoff_cells).reshape(-1, 2, 2)
        return np.array([hamiltonian(k) for k in ks])

    ks = np.append(k_grid, k_grid[0] + period)
    right, left = _band_vectors(matrices(ks[:-1]), band_index, biorthogonal)
    # the closing point is the first point shifted by one reciprocal vector
    right, left = np.vstack([right, right[:1]]), np.vstack([left, left[:1]])
    for _ in range(max_refine):
        turn = np.maximum(_ray_distance(right[:-1], right[1:]), _ray_distance(left[:-1], left[1:]))
        coarse = np.nonzero(turn > refine_tol)[0]
        coarse = coarse[np.diff(ks)[coarse] > 1e-9 * period]
        if coarse.size == 0:
            break
        mids = 0.5 * (ks[coarse] + ks[coarse + 1])
        r_new, l_new = _band_vectors(matrices(mids), band_index, biorthogonal)
        ks = np.insert(ks, coarse + 1, mids)
        right = np.insert(right, coarse + 1, r_new, axis=0)
        left = np.insert(left, coarse + 1, l_new, axis=0)

    ov = np.sum(left[:-1].conj() * right[1:], axis=1)
    norm = np.sqrt(np.abs(np.sum(left[:-1].conj() * right[:-1], axis=1) * np.sum(left[1:].conj() * right[1:], axis=1)))
    if np.any(np.abs(ov) / norm < 0.1):
        raise NumericalError("gap closure on path")
    total = np.prod(ov / np.abs(ov))
    return float(np.mod(-np.angle(total), 2 * np.pi))


def zpm_threshold(mass, lambda0, gamma0, a):
    """Minimum ``omega / Gamma0`` keeping zero-point motion below the spacing.

    SI inputs: mass in kg, ``lambda0`` and ``a`` in m, ``gamma0`` in rad/s.
    ``lambda0`` is accepted for symmetry with the species table; only ``a``
    enters.
    """
    for name, value in (("mass", mass), ("lambda0", lambda0), ("gamma0", gamma0), ("a", a)):
        if not np.all(np.asarray(value) > 0):
            raise ValueError(f"{name} must be positive")
    return HBAR / (2.0 * mass * np.asarray(a) ** 2 * gamma0)


def load_species():
    with resources.files("selforg.data").joinpath("species.csv").open() as fh:
        return [
            {
                "name": row["name"],
                "lambda0_nm": float(row["lambda0_nm"]),
                "gamma0_over_2pi_MHz": float(row["gamma0_over_2pi_MHz"]),
                "mass_kg": float(row["mass_kg"]),
            }
            for row in csv.DictReader(fh)
        ]


def zpm_table(spacings=(1.5, 1.0, 0.5), species=None):
    """Rows of ``omega/Gamma0`` thresholds for each species at spacings in lambda0."""
    species = load_species() if species is None else species
    rows = []
    for sp in species:
        lam = sp["lambda0_nm"] * 1e-9
        gamma0 = 2.0 * np.pi * sp["gamma0_over_2pi_MHz"] * 1e6
        rows.append({
            "name": sp["name"],
            **{f"a={s:g}": float(zpm_threshold(sp["mass_kg"], lam, gamma0, s * lam)) for s in spacings},
        })
    return rows
