import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selforg.dynamics import Mode, OutcomeKind, integrate
from selforg.greens import coupling_matrix
from selforg.dynamics import dipole_force, steady_coherences
from selforg.model import MotionAxes, SystemParams, angled_dipole, build_geometry, ring_radius, two_atom
from selforg.potentials import (
    effective_potential_curve,
    local_minima,
    ring_curve,
    ring_force,
    ring_radial_integrate,
    two_atom_curve,
    two_atom_force,
    two_atom_integrate,
)

PAIR = SystemParams(trap_freq=0.1, dipole=angled_dipole(np.pi / 2))
RING = SystemParams(trap_freq=0.1)


def test_force_vanishes_at_stationary_coupling_point():
    # find a zero of dJ12/da and put the trap there
    grid = np.linspace(0.3, 1.5, 20001)
    light = two_atom_force(grid, PAIR, a0=grid)
    i = np.nonzero(np.diff(np.sign(light)))[0][0]
    a = grid[i] - light[i] * (grid[i + 1] - grid[i]) / (light[i + 1] - light[i])
    assert abs(two_atom_force(a, PAIR, a0=a)) < 1e-9


def test_force_far_field_is_trap():
    params = SystemParams(dipole=angled_dipole(np.pi / 2))
    a = 1e3 / (2 * np.pi)
    trap = -0.5 * params.spring * (a - 0.6) / (2 * np.pi)
    assert two_atom_force(a, params, a0=0.6) == pytest.approx(trap, rel=1e-3)


def test_force_rejects_collided_separation():
    with pytest.raises(ValueError):
        two_atom_force(0.01, PAIR, a0=0.6)


def test_constant_force_potential_is_linear():
    grid = np.linspace(0.0, 2.0, 201)
    curve = effective_potential_curve(lambda x: np.full_like(x, 0.3), grid)
    assert np.allclose(curve.value, -0.3 * grid, atol=1e-14)
    assert local_minima(curve) == []


def test_harmonic_potential_minimum():
    grid = np.linspace(0.0, 2.0, 2001)
    curve = effective_potential_curve(lambda x: -2.0 * (x - 0.8137), grid)
    (m,) = local_minima(curve)
    assert abs(m[0] - 0.8137) < grid[1] - grid[0]


def test_non_monotone_grid_rejected():
    with pytest.raises(ValueError):
        effective_potential_curve(lambda x: x, np.array([0.0, 0.2, 0.1]))


def test_parabola_minimum_and_monotone_curve():
    grid = np.linspace(0, 2, 401)
    curve = effective_potential_curve(lambda x: -2 * (x - 1), grid)
    assert local_minima(curve)[0][0] == pytest.approx(1.0, abs=1e-9)
    mono = effective_potential_curve(lambda x: np.ones_like(x), grid)
    assert local_minima(mono) == []
    assert mono.boundary_minima == [(2.0, pytest.approx(-2.0))]


def _derivative_error(points_per_lambda):
    curve = two_atom_curve(PAIR, 0.6, points_per_lambda=points_per_lambda)
    x = curve.coordinate
    mid = 0.5 * (x[1:] + x[:-1])
    dv = np.diff(curve.value) / np.diff(x)
    f_mid = two_atom_force(mid, PAIR, a0=0.6)
    return np.max(np.abs(dv + f_mid)) / np.max(np.abs(f_mid))


def test_potential_derivative_reproduces_force():
    coarse, fine = _derivative_error(1000), _derivative_error(2000)
    assert fine < 1e-4
    # trapezoid rule: second order in the grid step
    assert coarse / fine == pytest.approx(4.0, rel=0.05)


def test_pi_half_pair_has_three_minima_below_start():
    curve = two_atom_curve(PAIR, 0.6)
    assert curve.coordinate[0] == pytest.approx(0.1) and curve.coordinate[-1] == pytest.approx(3.0)
    assert np.all(curve.value <= 0)
    assert len(local_minima(curve)) >= 3


def test_attractive_orientation_has_boundary_basin():
    curve = two_atom_curve(PAIR, 0.6, theta=0.2 * np.pi)
    local_minima(curve)
    assert curve.boundary_minima and curve.boundary_minima[0][0] == pytest.approx(0.1)


@pytest.mark.parametrize("radius_factor", [0.8, 1.0, 1.2])
def test_ring_force_matches_full_model(radius_factor):
    n, a0 = 4, 1.3
    r_t = ring_radius(n, a0)
    cfg = build_geometry("ring", n, a0)
    pos = cfg.trap_centers * radius_factor
    cm = coupling_matrix(pos, cfg.dipole)
    s = steady_coherences(cm, RING.rabi, RING.detuning)
    f = dipole_force(s, cm) - RING.spring * (pos - cfg.trap_centers) / (2 * np.pi)
    radial = np.sum(f * cfg.radial_directions, axis=1)
    reduced = ring_force(radius_factor * r_t, n, RING, r_trap=r_t)
    assert np.allclose(radial, reduced, rtol=1e-10, atol=0)


def test_ring_force_far_field_is_trap():
    params = SystemParams()
    r = 1e3 / (2 * np.pi)
    ref = -params.spring * (r - 0.5) / (2 * np.pi)
    assert ring_force(r, 6, params, r_trap=0.5) == pytest.approx(ref, rel=1e-3)


def test_ring_sum_is_permutation_symmetric():
    cfg = build_geometry("ring", 7, 0.9)
    c = coupling_matrix(cfg.trap_centers, cfg.dipole).c
    sums = c.sum(axis=1)
    assert np.allclose(sums, sums[0], atol=1e-12)


def test_ring_force_rejects_small_rings():
    with pytest.raises(ValueError):
        ring_force(1.0, 2, RING, r_trap=1.0)


def test_undriven_ring_stays_at_trap_radius():
    out = ring_radial_integrate(6, SystemParams(rabi=0.0, trap_freq=0.1), 1.0)
    assert out.outcome.kind is OutcomeKind.CONVERGED
    assert out.final == ring_radius(6, 1.0)


@pytest.mark.parametrize("n,a0", [(4, 1.2), (4, 1.6), (10, 1.1), (10, 1.8)])
def test_ring_relaxes_into_potential_minimum(n, a0):
    out = ring_radial_integrate(n, RING, a0)
    assert out.outcome.kind is OutcomeKind.CONVERGED
    minima = [m[0] for m in local_minima(ring_curve(n, RING, a0))]
    assert min(abs(out.final - m) for m in minima) < 1e-3


def test_pair_relaxes_into_potential_minimum():
    out = two_atom_integrate(PAIR, 0.6)
    assert out.outcome.kind is OutcomeKind.CONVERGED
    minima = [m[0] for m in local_minima(two_atom_curve(PAIR, 0.6))]
    assert min(abs(out.final - m) for m in minima) < 1e-3
    assert np.all(np.diff(out.times) > 0)


@pytest.mark.parametrize("theta,a0", [(np.pi / 2, 0.6), (np.pi / 4, 0.6), (0.42 * np.pi, 0.6)])
def test_reduced_pair_matches_full_simulation(theta, a0):
    params = SystemParams(trap_freq=0.1, dipole=angled_dipole(theta))
    reduced = two_atom_integrate(params, a0)
    full = integrate(two_atom(a0, theta), params)
    assert full.outcome.kind is reduced.outcome.kind is OutcomeKind.CONVERGED
    assert abs(np.diff(full.final.positions[:, 0])[0] - reduced.final) < 1e-4


def test_reduced_pair_collision():
    out = two_atom_integrate(SystemParams(trap_freq=0.1, dipole=angled_dipole(0.2 * np.pi)), 0.3)
    assert out.outcome.kind is OutcomeKind.COLLIDED


@settings(max_examples=6)
@given(st.floats(0.7, 1.5))
def test_ring_radial_full_model_agreement(a0):
    n = 5
    reduced = ring_radial_integrate(n, RING, a0)
    cfg = build_geometry("ring", n, a0, motion_axes=MotionAxes.RADIAL_ONLY)
    full = integrate(cfg, RING, Mode.ADIABATIC)
    radius = np.linalg.norm(full.final.positions, axis=1).mean()
    if reduced.outcome.kind is OutcomeKind.CONVERGED:
        assert abs(radius - reduced.final) < 1e-4
