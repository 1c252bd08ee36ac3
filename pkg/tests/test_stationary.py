import math
import random

import numpy as np
import pytest

from randstir import _rng
from randstir.stationary import (
    ProbabilityPartition,
    RemainderHit,
    sample_gem1,
    sample_mu,
    sample_mu_batch,
    sample_pd1,
    sample_pd1_batch,
    size_biased_pick,
    split_merge_step,
    split_merge_step_batch,
    stationarity_experiment,
)
from randstir.stats import ks_statistic, uniform_cdf

GOLOMB_DICKMAN = 0.6243


def oracle_largest_part(rng):
    """Largest GEM(1) piece, with Python's own generator; stops once the rest cannot win."""
    best, residual = 0.0, 1.0
    while residual > best:
        w = rng.random()
        best = max(best, residual * w)
        residual *= 1 - w
    return best


def P(active, tail=(), remainder=0.0):
    return ProbabilityPartition(active, tail, remainder)


def test_split_example():
    p = split_merge_step(P(0.3, (0.5, 0.2)), 0.2)
    assert p.active == pytest.approx(0.2)
    assert p.tail == pytest.approx((0.5, 0.2, 0.1))


def test_merge_examples():
    p = split_merge_step(P(0.3, (0.5, 0.2)), 0.5)
    assert p.active == pytest.approx(0.8) and p.tail == pytest.approx((0.2,))
    p = split_merge_step(P(0.3, (0.5, 0.2)), 0.9)
    assert p.active == pytest.approx(0.5) and p.tail == pytest.approx((0.5,))


def test_remainder_hit_is_raised():
    p = P(0.5, (0.3,), 0.2)
    with pytest.raises(RemainderHit):
        split_merge_step(p, 0.95)


def test_partition_validation():
    with pytest.raises(ValueError):
        P(0.5, (0.2,))
    with pytest.raises(ValueError):
        P(0.5, (0.2, 0.3))
    with pytest.raises(ValueError):
        P(0.0, (1.0,))


def test_gem_first_coordinates():
    rng = _rng.stream(20, 0)
    draws = [sample_gem1(rng) for _ in range(100_000)]
    first = np.array([m[0] for m, _ in draws])
    second = np.array([m[1] if len(m) > 1 else 0.0 for m, _ in draws])
    assert ks_statistic(first, uniform_cdf).passed
    assert abs(second.mean() - 0.25) <= 3 * second.std() / math.sqrt(len(second))
    for m, rest in draws[:1000]:
        assert math.fsum(m) + rest == pytest.approx(1.0, abs=1e-12)
        assert rest < 1e-8


def test_pd1_largest_part():
    rng = _rng.stream(21, 0)
    samples = [sample_pd1(rng) for _ in range(20_000)]
    assert all(np.all(np.diff(q) <= 0) for q in samples)
    batch = sample_pd1_batch(_rng.stream(21, 1), 100_000)
    assert np.all(np.diff(batch, axis=1) <= 0)
    oracle = random.Random(21)
    reference = np.mean([oracle_largest_part(oracle) for _ in range(100_000)])
    assert abs(reference - GOLOMB_DICKMAN) < 0.005
    assert abs(batch[:, 0].mean() - reference) < 0.005


def test_largest_dominates_first_coordinate():
    rng = _rng.stream(22, 0)
    for _ in range(1000):
        m, _ = sample_gem1(rng)
        assert m.max() >= m[0]


def test_size_biased_pick():
    rng = _rng.stream(23, 0)
    picks = np.array([size_biased_pick([0.5, 0.5], rng)[0] for _ in range(100_000)])
    assert abs(picks.sum() - 50_000) <= 3 * math.sqrt(25_000)
    assert all(size_biased_pick([1.0], rng) == (0, 1.0) for _ in range(100))
    masses = [size_biased_pick(sample_pd1(rng), rng)[1] for _ in range(100_000)]
    res = ks_statistic(masses, uniform_cdf)
    assert res.passed, res.line()


def test_mu_samples():
    rng = _rng.stream(24, 0)
    parts = [sample_mu(rng) for _ in range(100_000)]
    assert all(abs(p.total() - 1) <= 1e-12 for p in parts)
    assert ks_statistic([p.active for p in parts], uniform_cdf).passed
    scaled_max = [max(p.tail, default=0.0) / (1 - p.active) for p in parts]
    assert abs(np.mean(scaled_max) - GOLOMB_DICKMAN) < 0.005


def test_mass_is_conserved_over_many_steps():
    rng = _rng.stream(25, 0)
    for _ in range(20):
        p = sample_mu(rng)
        for _ in range(1000):
            before = p.total()
            try:
                q = split_merge_step(p, rng.random())
            except RemainderHit:
                continue
            assert abs(q.total() - before) <= 1e-12
            if len(q.tail) == len(p.tail) + 1:
                assert set(p.tail) <= set(q.tail)
            else:
                assert len(q.tail) in (len(p.tail) - 1, len(p.tail))
            p = q
        assert abs(p.total() - 1) <= 1e-9


def test_batch_step_matches_scalar_step():
    rng = _rng.stream(26, 0)
    a, t, r = sample_mu_batch(rng, 500)
    u = rng.random(500)
    a2, t2, r2, hit = split_merge_step_batch(a, t, r, u)
    for k in range(500):
        p = ProbabilityPartition(a[k], tuple(t[k][t[k] > 0]), r[k])
        try:
            q = split_merge_step(p, u[k])
        except RemainderHit:
            assert hit[k]
            continue
        assert not hit[k]
        assert a2[k] == pytest.approx(q.active, abs=1e-15)
        assert tuple(t2[k][t2[k] > 0]) == pytest.approx(q.tail, abs=1e-15)
        assert r2[k] == pytest.approx(q.remainder, abs=1e-15)


def test_zero_steps_is_trivially_stationary():
    report = stationarity_experiment(20_000, 0, seed=27)
    assert report.passed
    assert report.remainder_hits == 0


def test_requires_enough_replications():
    with pytest.raises(ValueError):
        stationarity_experiment(100, 1)
