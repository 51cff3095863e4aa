"""Domain types, geometry builders and positional disorder.

Natural units throughout: Gamma0 = 1 for rates, lambda0 = 1 for lengths
(k0 = 2 pi), hbar = 1. Momenta are stored in units of hbar k0 and the trap
frequency in units of the recoil frequency.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .greens import as_dipole, pair_separations

Z_DIPOLE = np.array([0.0, 0.0, 1.0], dtype=complex)
CIRCULAR_DIPOLE = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)


def angled_dipole(theta):
    """In-plane dipole ``[cos theta, i sin theta, 0]``."""
    return np.array([np.cos(theta), 1j * np.sin(theta), 0.0])


class GeometryKind(str, enum.Enum):
    CHAIN = "chain"
    RING = "ring"
    CUSTOM = "custom"


class MotionAxes(str, enum.Enum):
    X_ONLY = "x"
    RADIAL_ONLY = "radial"
    PLANAR_XY = "xy"


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters.

    ``rabi``, ``detuning``, ``recoil_freq`` and ``friction`` are in units of
    Gamma0; ``trap_freq`` is in units of ``recoil_freq``.
    """

    rabi: float = 0.05
    detuning: float = 0.0
    trap_freq: float = 1.0
    recoil_freq: float = 1e-3
    friction: float = 0.005
    dipole: np.ndarray = field(default_factory=lambda: Z_DIPOLE.copy())

    def __post_init__(self):
        object.__setattr__(self, "dipole", as_dipole(self.dipole))
        if self.rabi < 0:
            raise ValueError("rabi must be non-negative")
        if self.trap_freq <= 0 or self.recoil_freq <= 0:
            raise ValueError("trap_freq and recoil_freq must be positive")
        if self.friction < 0:
            raise ValueError("friction must be non-negative")
        if self.rabi > 0.1:
            warnings.warn(f"rabi = {self.rabi} is outside the weak-driving regime", stacklevel=2)
        if self.recoil_freq > 0.1:
            warnings.warn("recoil_freq is not small compared to Gamma0", stacklevel=2)

    @property
    def omega(self):
        """Trap angular frequency in units of Gamma0."""
        return self.trap_freq * self.recoil_freq

    @property
    def mass(self):
        """Atomic mass in natural units, ``hbar k0^2 / omega_r``."""
        return (2.0 * np.pi) ** 2 / self.recoil_freq

    @property
    def spring(self):
        """Trap stiffness ``m omega^2`` in hbar Gamma0 / lambda0^2."""
        return self.mass * self.omega**2

    @property
    def trap_period(self):
        return 2.0 * np.pi / self.omega

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class AtomConfiguration:
    trap_centers: np.ndarray
    geometry: GeometryKind = GeometryKind.CUSTOM
    motion_axes: MotionAxes = MotionAxes.PLANAR_XY
    dipole: np.ndarray = field(default_factory=lambda: Z_DIPOLE.copy())
    spacing: float | None = None
    seed: int | None = None
    disorder_amplitude: float = 0.0
    origin: tuple | None = None

    def __post_init__(self):
        centers = np.array(self.trap_centers, dtype=float).reshape(-1, 2)
        centers.setflags(write=False)
        object.__setattr__(self, "trap_centers", centers)
        object.__setattr__(self, "dipole", as_dipole(self.dipole))
        object.__setattr__(self, "geometry", GeometryKind(self.geometry))
        object.__setattr__(self, "motion_axes", MotionAxes(self.motion_axes))
        if len(centers) < 1:
            raise ValueError("need at least one atom")
        if len(centers) > 1:
            _, dist = pair_separations(centers)
            if np.min(dist[np.triu_indices(len(centers), 1)]) <= 0:
                raise ValueError("trap centers must be distinct")

    @property
    def n(self):
        return len(self.trap_centers)

    @property
    def center(self):
        if self.origin is not None:
            return np.asarray(self.origin, dtype=float)
        return self.trap_centers.mean(axis=0)

    @property
    def radial_directions(self):
        """Unit vectors from the array center to each trap center."""
        rel = self.trap_centers - self.center
        norm = np.linalg.norm(rel, axis=1, keepdims=True)
        return np.divide(rel, norm, out=np.zeros_like(rel), where=norm > 0)

    @property
    def ring_radius(self):
        if self.geometry is not GeometryKind.RING:
            raise ValueError("not a ring")
        return ring_radius(self.n, self.spacing)


@dataclass
class SimState:
    coherences: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    time: float = 0.0

    @property
    def populations(self):
        return np.abs(self.coherences) ** 2

    @property
    def weak_excitation(self):
        return bool(np.all(self.populations <= 0.1))


def ring_radius(n, spacing):
    """Radius of a regular N-gon with side ``spacing``."""
    return spacing / (2.0 * np.sin(np.pi / n))


def build_geometry(kind, n, spacing, dipole=None, motion_axes=None):
    """Build a chain or ring of ``n`` traps with nearest-neighbour ``spacing``.

    Chains lie on the x axis starting at the origin with dipoles along z and
    x-only motion. Rings are centered at the origin with circular in-plane
    dipoles and radial motion.
    """
    kind = GeometryKind(kind)
    if n < 1:
        raise ValueError("n must be at least 1")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if kind is GeometryKind.CHAIN:
        centers = np.column_stack([np.arange(n) * spacing, np.zeros(n)])
        dipole = Z_DIPOLE if dipole is None else dipole
        motion_axes = MotionAxes.X_ONLY if motion_axes is None else motion_axes
    elif kind is GeometryKind.RING:
        if n < 3:
            raise ValueError("a ring needs at least 3 atoms")
        radius = ring_radius(n, spacing)
        phi = 2.0 * np.pi * np.arange(n) / n
        centers = radius * np.column_stack([np.cos(phi), np.sin(phi)])
        dipole = CIRCULAR_DIPOLE if dipole is None else dipole
        motion_axes = MotionAxes.RADIAL_ONLY if motion_axes is None else motion_axes
    else:
        raise ValueError("custom geometries are built with AtomConfiguration directly")
    return AtomConfiguration(
        trap_centers=centers,
        geometry=kind,
        motion_axes=motion_axes,
        dipole=dipole,
        spacing=spacing,
        origin=(0.0, 0.0) if kind is GeometryKind.RING else None,
    )


def two_atom(spacing, theta):
    """Two atoms on the x axis with dipoles ``[cos theta, i sin theta, 0]``."""
    return build_geometry(GeometryKind.CHAIN, 2, spacing, dipole=angled_dipole(theta))


def make_rng(seed):
    """Portable generator: Philox counter-based bit generator seeded via SeedSequence."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def apply_disorder(config, amplitude, seed):
    """Displace each trap center uniformly in ``[-amplitude a0, amplitude a0]``.

    Displacements are drawn along x only for x-only motion, along the
    radial direction for radial motion, and along both axes otherwise.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if amplitude == 0:
        return config
    if config.spacing is None:
        raise ValueError("disorder needs a reference spacing a0")
    rng = make_rng(seed)
    width = amplitude * config.spacing
    draws = rng.uniform(-width, width, size=(config.n, 2))
    if config.motion_axes is MotionAxes.X_ONLY:
        shift = np.column_stack([draws[:, 0], np.zeros(config.n)])
    elif config.motion_axes is MotionAxes.RADIAL_ONLY:
        shift = draws[:, :1] * config.radial_directions
    else:
        shift = draws
    return replace(
        config,
        trap_centers=config.trap_centers + shift,
        seed=seed,
        disorder_amplitude=amplitude,
    )
