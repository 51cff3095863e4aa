"""Free-space dipole-dipole couplings and their position gradients.

Lengths are in units of the transition wavelength (lambda0 = 1, k0 = 2*pi)
and rates in units of the single-atom decay rate Gamma0.

The contracted coupling between two identical dipoles ``d`` separated by
``r`` splits into an isotropic and a projected part::

    C(r) = A(k r) |d|^2 + B(k r) |d . r_hat|^2

with ``A(u) = -(3/4) e^{iu} (u^2 + iu - 1) / u^3`` and
``B(u) = -(3/4) e^{iu} (-u^2 - 3iu + 3) / u^3``.  ``C = J - i Gamma/2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

K0 = 2.0 * np.pi

# Below this separation the 1/r^3 near field makes the model meaningless.
MIN_SEPARATION = 1e-3


class SeparationError(ValueError):
    """Raised for coincident or nearly coincident emitters."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


def _check_separation(r):
    if not np.isfinite(r) or r < MIN_SEPARATION:
        raise SeparationError(f"separation {r:.3g} lambda0 is below the near-field guard")


def green_tensor(r_vec, k=K0):
    """Free-space electric dyadic Green's tensor at separation ``r_vec``.

    ``r_vec`` is a real 3-vector in units of lambda0 (so ``k = 2 pi``). The
    result is a complex symmetric 3x3 array with dimensions of 1/length.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    _check_separation(r)
    kr = k * r
    rr = np.outer(r_vec, r_vec) / r**2
    pref = np.exp(1j * kr) / (4.0 * np.pi * k**2 * r**3)
    return pref * ((kr**2 + 1j * kr - 1.0) * np.eye(3) + (-(kr**2) - 3j * kr + 3.0) * rr)


def as_dipole(d):
    d = np.asarray(d, dtype=complex).reshape(-1)
    if d.shape != (3,):
        raise ValueError("dipole must be a complex 3-vector")
    norm = np.linalg.norm(d)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"dipole must have unit norm, got |d| = {norm!r}")
    return d


def coupling(r_vec, d, k=K0):
    """Coupling ``J - i Gamma/2`` (units of Gamma0) between two dipoles ``d``.

    Evaluated by direct contraction ``-(3 pi / k) d^dagger G d``.
    """
    d = as_dipole(d)
    g = green_tensor(r_vec, k)
    return complex(-(3.0 * np.pi / k) * (d.conj() @ g @ d))


def _radial_kernels(r, k=K0):
    """A, B and their derivatives with respect to r (not u)."""
    u = k * r
    e = np.exp(1j * u)
    u2 = u * u
    u3 = u2 * u
    pa = u2 + 1j * u - 1.0
    pb = -u2 - 3j * u + 3.0
    a = -0.75 * e * pa / u3
    b = -0.75 * e * pb / u3
    # d/du [e^{iu} p / u^3] = e^{iu} (i p + p' - 3 p / u) / u^3
    da = -0.75 * e * (1j * pa + (2.0 * u + 1j) - 3.0 * pa / u) / u3
    db = -0.75 * e * (1j * pb + (-2.0 * u - 3j) - 3.0 * pb / u) / u3
    return a, b, k * da, k * db


def _projector(d):
    # |d . r_hat|^2 = r_hat^T Re(d d^dagger) r_hat for real r_hat
    return np.real(np.outer(d, d.conj()))


def coupling_gradient(r_vec, d, k=K0):
    """Analytic gradient of ``coupling`` with respect to ``r_vec``.

    Returns a complex 3-vector, units Gamma0 / lambda0. Since ``r_vec`` is
    ``r_n - r_m``, this is the derivative with respect to the position of
    atom n.
    """
    d = as_dipole(d)
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    _check_separation(r)
    rhat = r_vec / r
    m = _projector(d)
    q = rhat @ m @ rhat
    _, b, da, db = _radial_kernels(r, k)
    grad_q = 2.0 * (m @ rhat - q * rhat) / r
    return da * rhat + db * q * rhat + b * grad_q


@dataclass(frozen=True)
class CouplingMatrix:
    """Couplings ``c[n, m] = C_nm`` and in-plane gradients ``grad_c[n, m, i]``.

    ``grad_c[n, m]`` is the derivative of ``C_nm`` with respect to the
    position of atom ``n``. Diagonal entries are ``-i/2`` (``J_nn = 0``,
    ``Gamma_nn = Gamma0``) with zero gradient.
    """

    c: np.ndarray
    grad_c: np.ndarray

    @property
    def n(self):
        return self.c.shape[0]

    @property
    def j(self):
        return self.c.real

    @property
    def gamma(self):
        return -2.0 * self.c.imag


def pair_separations(positions):
    positions = np.asarray(positions, dtype=float)
    diff = positions[:, None, :] - positions[None, :, :]
    return diff, np.sqrt(np.einsum("nmi,nmi->nm", diff, diff))


def coupling_matrix(positions, d, k=K0, gradients=True):
    """Coupling matrix for in-plane positions (N x 2, units lambda0)."""
    d = as_dipole(d)
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ValueError("positions must be an (N, 2) array")
    n = positions.shape[0]
    diff, dist = pair_separations(positions)
    iu = np.triu_indices(n, 1)
    if n > 1:
        bad = np.argmin(dist[iu])
        if not dist[iu][bad] >= MIN_SEPARATION:
            pair = (int(iu[0][bad]), int(iu[1][bad]))
            raise SeparationError(
                f"atoms {pair[0]} and {pair[1]} are {dist[iu][bad]:.3g} lambda0 apart", pair
            )

    off = ~np.eye(n, dtype=bool)
    r = np.where(off, dist, 1.0)
    rhat = diff / r[..., None]
    m2 = _projector(d)[:2, :2]
    mr = np.einsum("ij,nmj->nmi", m2, rhat)
    q = np.einsum("nmi,nmi->nm", rhat, mr)
    a, b, da, db = _radial_kernels(r, k)
    c = np.where(off, a + b * q, -0.5j)

    grad = None
    if gradients:
        grad = (da + db * q)[..., None] * rhat + (2.0 * b / r)[..., None] * (mr - q[..., None] * rhat)
        grad[~off] = 0.0
    return CouplingMatrix(c=c, grad_c=grad)
