import math
from collections import Counter

import numpy as np
import pytest

from randstir import _rng
from randstir.coupling import (
    ADD,
    SUPPRESS,
    TABLE_COLUMNS,
    CouplingDriver,
    aligned_sup_distance,
    bernoulli_param_p,
    bernoulli_param_q,
    build_discrete_returns,
    convergence_experiment,
    couple,
    discrete_mass_violations,
    evolve_coupled_discrete,
    horizon_steps,
    jump_indicators,
    limit_mass_violations,
    make_driver,
    returns_experiment,
)
from randstir.limit import JumpClock, evolve_limit, sample_jump_times, state_at
from randstir.state import RankedMassVector as R, distance
from randstir.stats import chi_square_gof
from randstir.stirring import enumerate_exact, returns_law, total_variation


def test_window_jump_probability():
    assert bernoulli_param_p(1, 100) == pytest.approx(-math.expm1(-1 / 200), rel=1e-15)
    assert bernoulli_param_p(10, 100) == pytest.approx(-math.expm1(-19 / 200), rel=1e-15)
    assert bernoulli_param_p(1, 100) == pytest.approx(0.004988, rel=1e-4)
    assert bernoulli_param_p(10, 100) == pytest.approx(0.09063, rel=1e-4)
    # void probability of the clock on the window
    lam = lambda t: t * t / 2
    for i in (1, 7, 30):
        a, b = (i - 1) / 10, i / 10
        assert bernoulli_param_p(i, 100) == pytest.approx(1 - math.exp(-(lam(b) - lam(a))))


def test_return_probability():
    assert bernoulli_param_q(5, 100, 1) == pytest.approx(0.04)
    assert bernoulli_param_q(1, 37, 0) == pytest.approx(1 / 37)
    for i in range(1, 10):
        for v in range(i):
            assert 1 / 50 <= bernoulli_param_q(i, 50, v) + 1e-15 <= i / 50 + 1e-15


def quiet_driver(n, T, jumps=(), uniforms=(0.5,) * 8, z=0.999999):
    return CouplingDriver(n, T, JumpClock(T, list(jumps)), list(uniforms), np.full(horizon_steps(n, T), z))


def test_no_jump_no_return():
    d = quiet_driver(100, 2.0)
    v, corr = build_discrete_returns(d)
    assert not v.any() and corr == []
    traj = evolve_coupled_discrete(d, v)
    for i in range(0, 21, 5):
        assert traj.state(i) == R(i + 1)


def test_first_window_return_is_fictive():
    d = quiet_driver(100, 2.0, jumps=[0.05], uniforms=[0.3])
    assert jump_indicators(d)[1] == 1
    v, _ = build_discrete_returns(d)
    assert v[1] == 1
    traj = evolve_coupled_discrete(d, v)
    assert traj.tags[1] == "fictive"
    assert traj.state(1) == R(1)
    assert traj.state(4) == R(4)


def test_window_boundary_belongs_to_left_window():
    d = quiet_driver(100, 2.0, jumps=[0.3])
    x = jump_indicators(d)
    assert x[3] == 1 and x.sum() == 1


def test_corrections_fire():
    # a jump in every window and z near 1: some jumps get suppressed
    d = quiet_driver(100, 2.0, jumps=np.arange(20) / 10 + 0.05, uniforms=[0.5] * 20)
    v, corr = build_discrete_returns(d)
    assert corr and all(kind == SUPPRESS for _, kind in corr)
    assert v[-1] == 20 - len(corr)
    # no jumps and z = 0: q > p adds a return
    d = quiet_driver(100, 2.0, z=0.0)
    v, corr = build_discrete_returns(d)
    assert corr and all(kind == ADD for _, kind in corr)


def test_bad_return_sequence():
    d = quiet_driver(100, 1.0)
    with pytest.raises(ValueError):
        evolve_coupled_discrete(d, np.array([0, 2] + [2] * 9))
    with pytest.raises(ValueError):
        evolve_coupled_discrete(d, np.zeros(5, dtype=int))


def test_zero_jump_distance_bounds():
    for n in (100, 10_000):
        run = couple(quiet_driver(n, 2.0))
        root = math.sqrt(n)
        assert 1 / root - 1e-12 <= run.sup_distance <= 2 / root + 1e-12
        assert run.jump_match


def test_distance_at_least_initial_gap():
    for r in range(50):
        run = couple(make_driver(100, 2.0, 12, r))
        assert run.sup_distance >= 0.1 - 1e-12


def dense_sup(run, step=1e-3):
    """Brute-force oracle: evaluate the distance on a fine time grid."""
    root = math.sqrt(run.n)
    best = 0.0
    for t in np.append(np.arange(0.0, run.T, step), run.T):
        t = float(t)
        i = math.floor(root * t + 1e-12)
        disc = run.discrete.state(min(i, run.discrete.steps)).scaled(1 / root)
        best = max(best, distance(state_at(run.continuous, t), disc))
    return best


def test_event_point_sup_matches_dense_grid():
    diffs = []
    for r in range(100):
        run = couple(make_driver(100, 2.0, 13, r))
        # a 1e-3 grid can step over a jump-to-grid window shorter than 1e-3,
        # where the gap is of order one; sample such runs more finely
        taus = [e.time for e in run.continuous.events]
        points = np.unique(np.concatenate([np.arange(21) / 10, taus]))
        dense = dense_sup(run, min(1e-3, np.diff(points).min() / 2))
        assert dense <= run.sup_distance + 1e-9
        diffs.append(run.sup_distance - dense)
    assert max(diffs) <= 2e-3


def test_continuous_part_is_the_standalone_process():
    for r in range(20):
        d = make_driver(1000, 2.0, 14, r)
        run = couple(d)
        alone = evolve_limit(sample_jump_times(2.0, _rng.stream(14, r, _rng.CLOCK)),
                             _rng.UniformStream(_rng.stream(14, r, _rng.UNIFORMS)), 2.0)
        assert [(e.time, e.u, e.state) for e in run.continuous.events] == [
            (e.time, e.u, e.state) for e in alone.events
        ]


def test_coupled_runs_keep_mass_identities():
    for r in range(100):
        run = couple(make_driver(400, 2.0, 15, r))
        assert discrete_mass_violations(run.discrete) == 0
        assert limit_mass_violations(run) == 0


def test_aligned_distance_only_for_matched_runs():
    run = couple(quiet_driver(100, 2.0, z=0.0))
    assert not run.jump_match
    assert aligned_sup_distance(run) == math.inf
    run = couple(quiet_driver(100, 2.0))
    assert aligned_sup_distance(run) <= run.sup_distance + 1e-12


def test_coupled_returns_follow_visited_fraction():
    n, T, reps = 100, 2.0, 100_000
    steps = horizon_steps(n, T)
    paths = np.array([build_discrete_returns(make_driver(n, T, 16, r, uniforms=[]))[0] for r in range(reps)])
    inc = np.diff(paths, axis=1)
    q = (np.arange(1, steps + 1)[None, :] - paths[:, :-1]) / n
    z = (inc - q).sum() / math.sqrt((q * (1 - q)).sum())
    assert abs(z) < 3
    checked = 0
    for a in range(steps):
        for vp in np.unique(paths[:, a]):
            sel = paths[:, a] == vp
            m = int(sel.sum())
            if m < 2000:
                continue
            p = (a + 1 - vp) / n
            assert abs(inc[sel, a].sum() - m * p) <= 3 * math.sqrt(m * p * (1 - p))
            checked += 1
    assert checked >= 20
    law = returns_law(n, steps)
    res = chi_square_gof(np.bincount(paths[:, -1], minlength=steps + 1), law / law.sum())
    assert res.passed, res.line()


def test_coupled_cycles_have_the_stirring_law():
    n, T, reps = 4, 2.0, 100_000
    counts = Counter()
    for r in range(reps):
        d = make_driver(n, T, 17, r)
        v, _ = build_discrete_returns(d)
        counts[evolve_coupled_discrete(d, v).state(4)] += 1
    empirical = {k: c / reps for k, c in counts.items()}
    assert total_variation(empirical, {k: float(p) for k, p in enumerate_exact(4, 4).items()}) < 0.02


def test_correction_rate_falls_with_n():
    res = returns_experiment([100, 10_000], 2.0, 2000, 18)
    assert res[10_000][2].mean() < res[100][2].mean()


def test_convergence_table_is_deterministic():
    a = convergence_experiment([100, 400, 1600], 2.0, 40, 19)
    b = convergence_experiment([100, 400, 1600], 2.0, 40, 19, threads=3)
    assert a.rows == b.rows and a.slope == b.slope
    assert [list(r) for r in a.rows] == [list(TABLE_COLUMNS)] * 3
    assert a.mass_violations == 0
    assert a.rows[2]["q50"] < a.rows[0]["q50"]
    with pytest.raises(ValueError):
        convergence_experiment([2], 2.0, 5)
