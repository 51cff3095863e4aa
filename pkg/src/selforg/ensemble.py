"""Disorder ensembles and one-parameter sweeps.

Realization ``i`` of an ensemble draws its disorder from
``derive_seed(base_seed, i)``, so results do not depend on execution order
or on the number of worker processes.
"""
from __future__ import annotations

import collections
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import classify_chain, dimer_strength
from .dynamics import Mode, OutcomeKind, StopCriteria, integrate
from .model import (
    CIRCULAR_DIPOLE,
    GeometryKind,
    MotionAxes,
    SystemParams,
    angled_dipole,
    apply_disorder,
    build_geometry,
    ring_radius,
)
from .potentials import ring_radial_integrate

RING_RADIUS_SPREAD = 0.02
RING_CHORD_SPREAD = 0.05


def derive_seed(base_seed, index):
    """Stable 64-bit seed for realization ``index``.

    Uses numpy's SeedSequence entropy mixing of ``[base_seed, index]``,
    which is specified independently of platform and numpy release.
    """
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass(frozen=True)
class Scenario:
    kind: GeometryKind = GeometryKind.CHAIN
    n: int = 4
    spacing: float = 0.5
    theta: float | None = None
    dipole: tuple | None = None
    motion_axes: MotionAxes | None = None
    params: SystemParams = field(default_factory=SystemParams)
    mode: Mode = Mode.ADIABATIC
    stop: StopCriteria = field(default_factory=StopCriteria)

    def dipole_vector(self):
        if self.dipole is not None:
            return np.asarray(self.dipole, dtype=complex)
        if self.theta is not None:
            return angled_dipole(self.theta)
        return CIRCULAR_DIPOLE if GeometryKind(self.kind) is GeometryKind.RING else self.params.dipole

    def configuration(self):
        return build_geometry(self.kind, self.n, self.spacing, self.dipole_vector(), self.motion_axes)

    def system_params(self):
        return replace(self.params, dipole=self.dipole_vector())

    def with_value(self, axis, value):
        if axis in ("spacing", "a0"):
            return replace(self, spacing=float(value))
        if axis == "n":
            return replace(self, n=int(value))
        if axis == "theta":
            return replace(self, theta=float(value), dipole=None)
        if axis in ("rabi", "detuning", "trap_freq", "recoil_freq", "friction"):
            return replace(self, params=replace(self.params, **{axis: float(value)}))
        raise ValueError(f"unknown sweep axis {axis!r}")


@dataclass
class Realization:
    index: int
    seed: int
    outcome: OutcomeKind
    observables: dict
    final_positions: np.ndarray
    label: str | None = None


@dataclass
class Stats:
    mean: float
    std: float
    n: int


@dataclass
class EnsembleResult:
    realizations: list
    stats: dict
    outcome_counts: dict
    label_counts: dict

    @property
    def n_realizations(self):
        return len(self.realizations)

    @property
    def converged(self):
        return self.outcome_counts.get(OutcomeKind.CONVERGED.value, 0)


def ring_shape(positions, center=(0.0, 0.0)):
    """Mean radius about ``center`` and relative spreads of radii and chords."""
    rel = np.asarray(positions) - np.asarray(center)
    radii = np.linalg.norm(rel, axis=1)
    order = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]))
    ordered = np.asarray(positions)[order]
    chords = np.linalg.norm(ordered - np.roll(ordered, -1, axis=0), axis=1)
    return radii.mean(), radii.std() / radii.mean(), chords.std() / chords.mean()


def observe(scenario, config, traj):
    """Observables of one finished run and a structural label."""
    final = traj.final.positions
    obs = {"max_population": traj.max_population}
    label = None
    if config.geometry is GeometryKind.CHAIN and config.n >= 3:
        x = np.sort(final[:, 0])
        if np.all(np.diff(x) > 0):
            cls = classify_chain(x, config.dipole)
            obs["D_s"] = dimer_strength(x, config.dipole)
            obs["a_final/a0"] = float(np.mean(np.diff(x)) / scenario.spacing)
            label = cls.kind.value
    elif config.geometry is GeometryKind.CHAIN and config.n == 2:
        obs["a_final"] = float(abs(final[1, 0] - final[0, 0]))
    elif config.geometry is GeometryKind.RING:
        radius, spread, chord_spread = ring_shape(final, config.center)
        obs["R_final/R0"] = radius / ring_radius(config.n, scenario.spacing)
        intact = spread < RING_RADIUS_SPREAD and chord_spread < RING_CHORD_SPREAD
        label = "ring" if intact else "broken"
    return obs, label


def run_realization(scenario, index, amplitude, base_seed):
    seed = derive_seed(base_seed, index)
    config = apply_disorder(scenario.configuration(), amplitude, seed)
    traj = integrate(config, scenario.system_params(), scenario.mode, scenario.stop)
    obs, label = observe(scenario, config, traj)
    return Realization(index, seed, traj.outcome.kind, obs, traj.final.positions, label)


def _run_one(args):
    return run_realization(*args)


def aggregate(realizations):
    """Statistics over converged realizations, in realization-index order."""
    realizations = sorted(realizations, key=lambda r: r.index)
    counts = collections.Counter(r.outcome.value for r in realizations)
    labels = collections.Counter(r.label for r in realizations if r.label is not None)
    converged = [r for r in realizations if r.outcome is OutcomeKind.CONVERGED]
    names = []
    for r in realizations:
        names += [k for k in r.observables if k not in names]
    stats = {}
    for name in names:
        source = realizations if name == "max_population" else converged
        vals = np.array([r.observables[name] for r in source if name in r.observables], dtype=float)
        if vals.size:
            stats[name] = Stats(float(np.mean(vals)), float(np.std(vals)), int(vals.size))
        else:
            stats[name] = Stats(float("nan"), float("nan"), 0)
    return EnsembleResult(realizations, stats, dict(counts), dict(labels))


def run_ensemble(scenario, n_realizations, disorder_amplitude, base_seed=0, jobs=1):
    """Run ``n_realizations`` disordered copies of ``scenario`` and aggregate.

    Non-converged runs are tallied in ``outcome_counts`` and excluded from
    the observable means (``max_population`` uses every run).
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be at least 1")
    tasks = [(scenario, i, disorder_amplitude, base_seed) for i in range(n_realizations)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    return aggregate(results)


@dataclass
class SweepResult:
    axis: str
    values: np.ndarray
    points: list
    extras: list

    @property
    def flagged(self):
        """Grid points where no realization reached a steady state."""
        return [p.converged == 0 for p in self.points]


def sweep(scenario, axis, values, n_realizations=1, disorder_amplitude=0.0, base_seed=0, jobs=1,
          radial_reference=None):
    """Ensemble at every value of ``axis``.

    For rings, ``radial_reference`` (default: on for rings) adds the
    disorder-free radial-model radius ``R_radial/R0`` at each point.
    """
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ValueError("sweep grid is empty")
    if radial_reference is None:
        radial_reference = GeometryKind(scenario.kind) is GeometryKind.RING
    points, extras = [], []
    for v in values:
        sc = scenario.with_value(axis, v)
        points.append(run_ensemble(sc, n_realizations, disorder_amplitude, base_seed, jobs))
        extra = {}
        if radial_reference:
            reduced = ring_radial_integrate(sc.n, sc.system_params(), sc.spacing, sc.stop)
            extra["R_radial/R0"] = reduced.final / ring_radius(sc.n, sc.spacing)
            extra["radial_outcome"] = reduced.outcome.kind.value
        extras.append(extra)
    return SweepResult(axis, values, points, extras)
