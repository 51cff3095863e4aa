"""Coupled internal and motional dynamics of driven, trapped emitters.

State layout for the integrator: positions (N x 2, lambda0), momenta
(N x 2, hbar k0) and, in full mode, the real and imaginary parts of the
mean-field coherences.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45

from .greens import SeparationError, coupling_matrix, pair_separations
from .model import MotionAxes, SimState

TWO_PI = 2.0 * np.pi


class NumericalError(RuntimeError):
    """Integrator or linear-algebra failure."""


class Mode(str, enum.Enum):
    FULL = "full"
    ADIABATIC = "adiabatic"


class OutcomeKind(str, enum.Enum):
    CONVERGED = "converged"
    COLLIDED = "collided"
    TIMEOUT = "timeout"
    EXCITATION_BREACH = "excitation_breach"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    time: float
    state: SimState | None = None
    pair: tuple | None = None

    @property
    def converged(self):
        return self.kind is OutcomeKind.CONVERGED


@dataclass
class StopCriteria:
    """Termination and sampling controls.

    ``hold`` defaults to ten trap periods. ``sample_times``, if given,
    replaces stride decimation with dense-output sampling at those times.
    """

    t_max: float = 2e6
    eps_p: float = 1e-6
    eps_f: float = 1e-8
    hold: float | None = None
    collision_distance: float = 0.05
    max_population: float = 0.1
    stride: int = 1
    rtol: float = 1e-8
    atol: float = 1e-10
    sample_times: np.ndarray | None = None
    max_steps: int | None = None


@dataclass
class Trajectory:
    samples: list = field(default_factory=list)
    outcome: Outcome | None = None
    max_population: float = 0.0
    steps: int = 0

    @property
    def times(self):
        return np.array([s.time for s in self.samples])

    @property
    def positions(self):
        return np.array([s.positions for s in self.samples])

    @property
    def final(self):
        return self.samples[-1]


def steady_coherences(couplings, rabi, detuning, check=True, max_cond=1e12):
    """Adiabatic steady state of the coherences at fixed positions.

    Solves ``(C - delta) sigma = Omega`` where ``C`` carries ``-i/2`` on the
    diagonal; this is the fixed point of :func:`coherence_rhs`.
    """
    c = couplings.c if hasattr(couplings, "c") else np.asarray(couplings)
    n = c.shape[0]
    m = c - detuning * np.eye(n)
    if check:
        cond = np.linalg.cond(m)
        if not np.isfinite(cond) or cond > max_cond:
            raise NumericalError(f"steady-state system is singular (condition {cond:.3g})")
    try:
        return np.linalg.solve(m, np.full(n, rabi, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("steady-state system is singular") from exc


def coherence_rhs(coherences, couplings, params):
    """Time derivative of the coherences at fixed positions (uniform drive phase)."""
    sigma = np.asarray(coherences, dtype=complex)
    c = couplings.c
    return -1j * (c @ sigma - params.detuning * sigma - params.rabi)


def dipole_force(coherences, couplings):
    """Light-induced force on each atom in units of hbar k0 Gamma0.

    ``F_n = -sum_m [dC_nm/dr_n conj(s_n) s_m + c.c.]``. The dissipative part
    (gradient of Gamma_nm) carries recoil into the radiated field, so the
    forces sum to zero only when all coherences share a common phase.
    """
    sigma = np.asarray(coherences, dtype=complex)
    field_grad = np.einsum("nmi,m->ni", couplings.grad_c, sigma)
    return -(2.0 / TWO_PI) * np.real(sigma.conj()[:, None] * field_grad)


def trap_force(positions, trap_centers, params):
    return -(params.spring / TWO_PI) * (np.asarray(positions) - trap_centers)


def constrain(vectors, axes, radial=None):
    if axes is MotionAxes.X_ONLY:
        out = np.array(vectors, dtype=float)
        out[:, 1] = 0.0
        return out
    if axes is MotionAxes.RADIAL_ONLY:
        return np.sum(vectors * radial, axis=1, keepdims=True) * radial
    return vectors


def detect_steady(times, momenta, forces, eps_p, eps_f, hold):
    """True iff |p| < eps_p and |F| < eps_f at every sample of the trailing ``hold`` window.

    ``momenta`` and ``forces`` are sequences of per-sample arrays. The
    history must reach back at least ``hold`` before the last sample.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return False
    ok = np.array(
        [np.max(np.abs(p)) < eps_p and np.max(np.abs(f)) < eps_f for p, f in zip(momenta, forces)]
    )
    start = times[-1] - hold
    inside = np.nonzero(times <= start)[0]
    if inside.size == 0:
        return False
    return bool(np.all(ok[inside[-1]:]))


class _System:
    """Right-hand side and diagnostics for one configuration."""

    def __init__(self, config, params, mode):
        self.n = config.n
        self.centers = config.trap_centers
        self.axes = config.motion_axes
        self.radial = config.radial_directions
        self.params = params
        self.mode = Mode(mode)
        self.d = config.dipole
        self.velocity_scale = params.recoil_freq / TWO_PI

    def unpack(self, y):
        n = self.n
        pos = y[: 2 * n].reshape(n, 2)
        mom = y[2 * n : 4 * n].reshape(n, 2)
        sigma = None
        if self.mode is Mode.FULL:
            sigma = y[4 * n : 5 * n] + 1j * y[5 * n : 6 * n]
        return pos, mom, sigma

    def pack(self, pos, mom, sigma=None):
        parts = [np.ravel(pos), np.ravel(mom)]
        if self.mode is Mode.FULL:
            parts += [sigma.real, sigma.imag]
        return np.concatenate(parts)

    def forces(self, pos, sigma=None):
        """Constrained net force (light + trap) and the coherences used."""
        cm = coupling_matrix(pos, self.d)
        if sigma is None:
            sigma = steady_coherences(cm, self.params.rabi, self.params.detuning, check=False)
        f = dipole_force(sigma, cm) + trap_force(pos, self.centers, self.params)
        return constrain(f, self.axes, self.radial), sigma, cm

    def rhs(self, t, y):
        pos, mom, sigma = self.unpack(y)
        f, sigma, cm = self.forces(pos, sigma)
        dpos = self.velocity_scale * mom
        dmom = f - self.params.friction * mom
        dsigma = coherence_rhs(sigma, cm, self.params) if self.mode is Mode.FULL else None
        return self.pack(dpos, dmom, dsigma)

    def state(self, t, y):
        pos, mom, sigma = self.unpack(y)
        f, sigma, _ = self.forces(pos, sigma)
        return SimState(coherences=sigma, positions=pos.copy(), momenta=mom.copy(), time=float(t)), f


def _closest_pair(pos):
    n = len(pos)
    if n < 2:
        return None, np.inf
    _, dist = pair_separations(pos)
    iu = np.triu_indices(n, 1)
    k = int(np.argmin(dist[iu]))
    return (int(iu[0][k]), int(iu[1][k])), float(dist[iu][k])


def integrate(config, params, mode=Mode.ADIABATIC, stop=None):
    """Relax a configuration from rest at its trap centers.

    Integrates positions and momenta with an embedded Runge-Kutta 4(5) pair.
    In full mode the coherences are integrated alongside, starting from the
    ground state; in adiabatic mode they follow their instantaneous steady
    state. Terminates on convergence, collision, excitation breach or
    ``stop.t_max``.
    """
    stop = stop or StopCriteria()
    system = _System(config, params, mode)
    hold = stop.hold if stop.hold is not None else 10.0 * params.trap_period
    n = config.n

    y0 = system.pack(config.trap_centers, np.zeros((n, 2)), np.zeros(n, dtype=complex))
    solver = RK45(system.rhs, 0.0, y0, stop.t_max, rtol=stop.rtol, atol=stop.atol)
    traj = Trajectory()

    sample_times = None if stop.sample_times is None else np.sort(np.asarray(stop.sample_times, float))
    next_sample = 0

    state, f = system.state(0.0, y0)
    if sample_times is None or (sample_times.size and sample_times[0] <= 0.0):
        traj.samples.append(state)
        next_sample = 0 if sample_times is None else int(np.searchsorted(sample_times, 0.0, "right"))
    traj.max_population = float(np.max(state.populations))
    steady_since = 0.0 if _quiet(state, f, stop) else None

    while True:
        t_prev = solver.t
        try:
            msg = solver.step()
        except SeparationError as exc:
            # a trial stage overlapped two atoms; the step never completed
            state, _ = system.state(t_prev, solver.y)
            traj.samples.append(state)
            traj.outcome = Outcome(OutcomeKind.COLLIDED, t_prev, state, exc.pair)
            return traj
        if solver.status == "failed":
            raise NumericalError(f"integrator failed at t = {solver.t:.6g}: {msg}")
        traj.steps += 1
        t = solver.t

        if sample_times is not None:
            dense = None
            while next_sample < sample_times.size and sample_times[next_sample] <= t:
                dense = dense or solver.dense_output()
                ts = sample_times[next_sample]
                traj.samples.append(system.state(ts, dense(ts))[0])
                next_sample += 1

        state, f = system.state(t, solver.y)
        traj.max_population = max(traj.max_population, float(np.max(state.populations)))
        pair, dmin = _closest_pair(state.positions)

        outcome = None
        if dmin < stop.collision_distance:
            outcome = Outcome(OutcomeKind.COLLIDED, t, state, pair)
        elif np.max(state.populations) > stop.max_population:
            outcome = Outcome(OutcomeKind.EXCITATION_BREACH, t, state)
        else:
            if _quiet(state, f, stop):
                steady_since = t if steady_since is None else steady_since
                if t - steady_since >= hold:
                    outcome = Outcome(OutcomeKind.CONVERGED, t, state)
            else:
                steady_since = None
            if outcome is None and (solver.status == "finished" or (stop.max_steps and traj.steps >= stop.max_steps)):
                outcome = Outcome(OutcomeKind.TIMEOUT, t, state)

        if outcome is not None:
            if not traj.samples or traj.samples[-1].time < t:
                traj.samples.append(state)
            traj.outcome = outcome
            return traj
        if sample_times is None and traj.steps % max(stop.stride, 1) == 0:
            traj.samples.append(state)


def _quiet(state, force, stop):
    return np.max(np.abs(state.momenta)) < stop.eps_p and np.max(np.abs(force)) < stop.eps_f
