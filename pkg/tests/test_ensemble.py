import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from selforg.dynamics import OutcomeKind, StopCriteria
from selforg.ensemble import Scenario, aggregate, derive_seed, run_ensemble, run_realization, sweep
from selforg.model import GeometryKind, SystemParams

CHAIN4 = Scenario(GeometryKind.CHAIN, 4, 0.5, params=SystemParams(trap_freq=1.0))


def _same(a, b):
    assert a.outcome_counts == b.outcome_counts
    assert a.label_counts == b.label_counts
    assert a.stats.keys() == b.stats.keys()
    for k in a.stats:
        sa, sb = a.stats[k], b.stats[k]
        assert (sa.mean, sa.std, sa.n) == (sb.mean, sb.std, sb.n) or (np.isnan(sa.mean) and np.isnan(sb.mean))
    for ra, rb in zip(a.realizations, b.realizations):
        assert ra.seed == rb.seed
        assert np.array_equal(ra.final_positions, rb.final_positions)


def test_derive_seed_is_pinned():
    # SeedSequence mixing is platform independent; pin one value against drift
    assert derive_seed(0, 0) == derive_seed(0, 0)
    assert derive_seed(0, 0) != derive_seed(0, 1) != derive_seed(1, 0)
    assert 0 <= derive_seed(7, 3) < 2**64
    assert derive_seed(0, 0) == 12750949206108985319


@given(st.integers(0, 2**32), st.integers(0, 10**6))
def test_derive_seed_range(base, index):
    s = derive_seed(base, index)
    assert 0 <= s < 2**64
    assert s == derive_seed(base, index)


def test_zero_disorder_gives_identical_realizations():
    res = run_ensemble(CHAIN4, 5, 0.0, base_seed=3)
    assert res.n_realizations == 5
    first = res.realizations[0].final_positions
    for r in res.realizations[1:]:
        assert np.array_equal(r.final_positions, first)
    for name, s in res.stats.items():
        assert s.std == 0.0, name


def test_repeat_is_bitwise_identical():
    a = run_ensemble(CHAIN4, 4, 0.01, base_seed=11)
    b = run_ensemble(CHAIN4, 4, 0.01, base_seed=11)
    _same(a, b)


def test_parallel_equals_sequential():
    a = run_ensemble(CHAIN4, 4, 0.01, base_seed=5, jobs=1)
    b = run_ensemble(CHAIN4, 4, 0.01, base_seed=5, jobs=2)
    _same(a, b)


def test_realization_seed_bound_to_index():
    r = run_realization(CHAIN4, 2, 0.01, 5)
    assert r.seed == derive_seed(5, 2)
    res = run_ensemble(CHAIN4, 3, 0.01, base_seed=5)
    assert np.array_equal(res.realizations[2].final_positions, r.final_positions)


def test_aggregate_permutation_invariant():
    res = run_ensemble(CHAIN4, 5, 0.01, base_seed=2)
    shuffled = list(res.realizations)
    random.Random(0).shuffle(shuffled)
    _same(res, aggregate(shuffled))


def test_outcome_counts_and_std_nonnegative():
    res = run_ensemble(CHAIN4, 4, 0.02, base_seed=1)
    assert sum(res.outcome_counts.values()) == 4
    assert all(s.std >= 0 for s in res.stats.values())


def test_nonconverged_runs_tallied_not_averaged():
    short = replace(CHAIN4, stop=StopCriteria(t_max=50.0))
    res = run_ensemble(short, 3, 0.01)
    assert res.outcome_counts == {OutcomeKind.TIMEOUT.value: 3}
    assert res.stats["D_s"].n == 0
    assert np.isnan(res.stats["D_s"].mean)
    assert res.stats["max_population"].n == 3


def test_needs_one_realization():
    with pytest.raises(ValueError):
        run_ensemble(CHAIN4, 0, 0.01)


def test_single_point_sweep_equals_ensemble():
    s = sweep(CHAIN4, "a0", [0.5], n_realizations=3, disorder_amplitude=0.01, base_seed=4)
    e = run_ensemble(CHAIN4, 3, 0.01, base_seed=4)
    assert len(s.points) == 1
    _same(s.points[0], e)
    assert s.flagged == [False]


def test_sweep_flags_points_without_steady_state():
    short = replace(CHAIN4, stop=StopCriteria(t_max=50.0))
    s = sweep(short, "detuning", [0.0, 0.1], n_realizations=1)
    assert s.flagged == [True, True]


def test_sweep_rejects_empty_grid_and_unknown_axis():
    with pytest.raises(ValueError):
        sweep(CHAIN4, "a0", [])
    with pytest.raises(ValueError):
        sweep(CHAIN4, "colour", [1.0])


def test_sweep_axis_updates_scenario():
    assert CHAIN4.with_value("detuning", -0.5).params.detuning == -0.5
    assert CHAIN4.with_value("a0", 0.7).spacing == 0.7
    assert CHAIN4.with_value("n", 6).n == 6


@pytest.mark.slow
def test_dimer_strength_error_bars_modest():
    res = run_ensemble(CHAIN4, 30, 0.01, base_seed=0)
    assert res.converged == 30
    ds = res.stats["D_s"]
    assert ds.std < 0.2 * abs(ds.mean)
