"""Reduced one-coordinate models: two atoms on a line and the symmetric ring.

Forces are in units of hbar k0 Gamma0 and coordinates in lambda0, so the
integrated potentials come out in hbar k0 Gamma0 lambda0 = 2 pi hbar Gamma0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45, cumulative_trapezoid

from .dynamics import NumericalError, Outcome, OutcomeKind, StopCriteria, TWO_PI
from .greens import _projector, _radial_kernels, as_dipole
from .model import SimState, angled_dipole, ring_radius

COLLISION_DISTANCE = 0.05


@dataclass
class PotentialCurve:
    coordinate: np.ndarray
    value: np.ndarray
    minima: list = field(default_factory=list)
    boundary_minima: list = field(default_factory=list)


def _line_coupling(a, d):
    """C and dC/da for two dipoles ``d`` separated by ``a`` along x."""
    a = np.asarray(a, dtype=float)
    q = _projector(as_dipole(d))[0, 0]
    ka, kb, dka, dkb = _radial_kernels(a)
    return ka + kb * q, dka + dkb * q


def two_atom_force(a, params, theta=None, a0=None):
    """Force on the relative coordinate of two driven atoms.

    ``p_R' = -2 |s|^2 dJ12/da - (1/2) m w^2 (a - a0)`` with the exact steady
    modulus ``|s|^2 = Omega^2 / |C12 - delta - i/2|^2``. ``theta`` overrides
    the dipole in ``params`` with ``[cos theta, i sin theta, 0]``.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < COLLISION_DISTANCE):
        raise ValueError(f"separation below the collision threshold {COLLISION_DISTANCE}")
    if a0 is None:
        raise ValueError("trap spacing a0 is required")
    d = params.dipole if theta is None else angled_dipole(theta)
    c, dc = _line_coupling(a, d)
    pop = params.rabi**2 / np.abs(c - params.detuning - 0.5j) ** 2
    light = -2.0 * pop * dc.real
    return (light - 0.5 * params.spring * (a - a0)) / TWO_PI


def effective_potential_curve(force_fn, grid):
    """``V(x) = -int force dx`` by cumulative trapezoid, anchored at ``V(grid[0]) = 0``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    force = np.asarray(force_fn(grid), dtype=float)
    value = -cumulative_trapezoid(force, grid, initial=0.0)
    curve = PotentialCurve(coordinate=grid, value=value)
    curve.minima, curve.boundary_minima = _find_minima(grid, value)
    return curve


def _find_minima(x, v):
    interior = []
    dv = np.diff(v)
    for i in range(1, len(v) - 1):
        if dv[i - 1] < 0 and dv[i] > 0:
            interior.append(_parabola(x[i - 1 : i + 2], v[i - 1 : i + 2]))
    boundary = []
    if dv[0] > 0:
        boundary.append((float(x[0]), float(v[0])))
    if dv[-1] < 0:
        boundary.append((float(x[-1]), float(v[-1])))
    return interior, boundary


def _parabola(x, v):
    """Vertex of the parabola through three points."""
    x0, x1, x2 = x
    v0, v1, v2 = v
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (v1 - v0) + x1 * (v0 - v2) + x0 * (v2 - v1)) / den
    b = (x2**2 * (v0 - v1) + x1**2 * (v2 - v0) + x0**2 * (v1 - v2)) / den
    if a <= 0:
        return float(x1), float(v1)
    xv = -b / (2 * a)
    c = v1 - a * x1**2 - b * x1
    return float(xv), float(c - b**2 / (4 * a))


def local_minima(curve):
    """Interior strict local minima of ``curve`` sorted by coordinate.

    Minima sitting on the grid ends (for instance an attractive basin at
    small separation) are available as ``curve.boundary_minima``.
    """
    interior, boundary = _find_minima(np.asarray(curve.coordinate), np.asarray(curve.value))
    curve.boundary_minima = boundary
    return sorted(interior)


def two_atom_curve(params, a0, grid=None, theta=None, points_per_lambda=2000):
    if grid is None:
        grid = np.linspace(0.1, 3.0, int(2.9 * points_per_lambda) + 1)
    return effective_potential_curve(lambda a: two_atom_force(a, params, theta, a0), grid)


def ring_chords(radius, n):
    m = np.arange(1, n)
    s = np.sin(np.pi * m / n)
    return 2.0 * np.asarray(radius, dtype=float)[..., None] * s, s


def ring_force(radius, n, params, spacing=None, r_trap=None):
    """Radial force on each atom of a permutation-symmetric ring.

    ``s = -i Omega / (i delta - 1/2 - i sum_m C_1m)`` and the light force is
    the radial projection of the pair forces on one atom,
    ``-|s|^2 sum_m dJ_1m/dR`` (each chord ``2 R sin(pi m/N)`` contributes
    ``J'(r) sin(pi m/N)``), plus the trap term ``-m w^2 (R - R_t)``.
    Circular in-plane dipoles are assumed, so couplings depend on distance only.
    """
    if n < 3:
        raise ValueError("a ring needs at least 3 atoms")
    if r_trap is None:
        if spacing is None:
            raise ValueError("give spacing a0 or the trap radius")
        r_trap = ring_radius(n, spacing)
    radius = np.asarray(radius, dtype=float)
    chords, s = ring_chords(radius, n)
    if np.any(chords < COLLISION_DISTANCE):
        raise ValueError("ring chord below the collision threshold")
    ka, kb, dka, dkb = _radial_kernels(chords)
    c = ka + 0.5 * kb
    dc = dka + 0.5 * dkb
    csum = c.sum(axis=-1)
    sigma = -1j * params.rabi / (1j * params.detuning - 0.5 - 1j * csum)
    light = -2.0 * np.abs(sigma) ** 2 * np.sum(dc.real * s, axis=-1)
    return (light - params.spring * (radius - r_trap)) / TWO_PI


def ring_curve(n, params, spacing, grid=None, points_per_lambda=2000):
    r_t = ring_radius(n, spacing)
    if grid is None:
        lo = max(COLLISION_DISTANCE / (2 * np.sin(np.pi / n)) * 1.01, 0.2 * r_t)
        hi = 2.0 * r_t
        grid = np.linspace(lo, hi, int((hi - lo) * points_per_lambda) + 1)
    return effective_potential_curve(lambda r: ring_force(r, n, params, r_trap=r_t), grid)


@dataclass
class ReducedTrajectory:
    times: np.ndarray
    coordinate: np.ndarray
    momentum: np.ndarray
    outcome: Outcome

    @property
    def final(self):
        return float(self.coordinate[-1])


def _relax_1d(force_fn, x0, velocity_factor, params, stop, lower):
    """Integrate ``x' = p/m_eff``, ``p' = F - gamma p`` with the shared stop rules.

    ``force_fn`` returns hbar k0 Gamma0; ``p`` is in hbar k0.
    """
    stop = stop or StopCriteria()
    hold = stop.hold if stop.hold is not None else 10.0 * params.trap_period
    vscale = params.recoil_freq / TWO_PI * velocity_factor

    def rhs(t, y):
        return np.array([vscale * y[1], force_fn(y[0]) - params.friction * y[1]])

    solver = RK45(rhs, 0.0, np.array([x0, 0.0]), stop.t_max, rtol=stop.rtol, atol=stop.atol)
    ts, xs, ps = [0.0], [x0], [0.0]
    steady_since = None
    steps = 0

    def record():
        if solver.t > ts[-1]:
            ts.append(solver.t), xs.append(solver.y[0]), ps.append(solver.y[1])

    def snapshot(kind):
        st = SimState(coherences=np.zeros(0, complex), positions=np.array([[solver.y[0], 0.0]]),
                      momenta=np.array([[solver.y[1], 0.0]]), time=float(solver.t))
        return ReducedTrajectory(np.array(ts), np.array(xs), np.array(ps), Outcome(kind, solver.t, st))

    while True:
        try:
            solver.step()
        except ValueError:
            return snapshot(OutcomeKind.COLLIDED)
        if solver.status == "failed":
            raise NumericalError(f"reduced integration failed at t = {solver.t:.6g}")
        steps += 1
        x, p = solver.y
        if steps % max(stop.stride, 1) == 0:
            record()
        if x < lower:
            record()
            return snapshot(OutcomeKind.COLLIDED)
        if abs(p) < stop.eps_p and abs(force_fn(x)) < stop.eps_f:
            steady_since = solver.t if steady_since is None else steady_since
            if solver.t - steady_since >= hold:
                record()
                return snapshot(OutcomeKind.CONVERGED)
        else:
            steady_since = None
        if solver.status == "finished" or (stop.max_steps and steps >= stop.max_steps):
            record()
            return snapshot(OutcomeKind.TIMEOUT)


def two_atom_integrate(params, a0, theta=None, stop=None):
    """Relax the pair separation from ``a0`` at rest.

    ``p_R = (p2 - p1)/2`` so that ``a' = 2 p_R / m``, matching the full
    two-body motion exactly.
    """
    return _relax_1d(
        lambda a: two_atom_force(a, params, theta, a0), a0, 2.0, params, stop, COLLISION_DISTANCE
    )


def ring_radial_integrate(n, params, spacing, stop=None):
    """Relax the ring radius from the trap radius at rest."""
    r_t = ring_radius(n, spacing)
    lower = COLLISION_DISTANCE / (2.0 * np.sin(np.pi / n))
    return _relax_1d(lambda r: ring_force(r, n, params, r_trap=r_t), r_t, 1.0, params, stop, lower)
