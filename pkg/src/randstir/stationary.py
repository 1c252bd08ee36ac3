"""Split-and-merge transformation on probability partitions and its invariant law.

A partition has a distinguished active part.  A uniform ``u`` either splits
the active part (``u <= active``: the new active part is ``u``) or merges the
tail part whose cumulative bracket contains ``u`` into the active one.  The
law ``mu`` (active part uniform, the rest a ranked GEM(1) remainder) is
invariant under this map.

Stick-breaking is truncated once the unbroken residual drops below
``eps_trunc``; that residual, together with any parts not above
``eps_trunc``, is carried as an inert ``remainder``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .state import insert_ranked, RankedMassVector
from .stats import ks_statistic, two_sample_ks, uniform_cdf

EPS_TRUNC = 1e-8
BLOCK = 10_000


class RemainderHit(ValueError):
    """The uniform fell into the truncation remainder of a partition."""


@dataclass(frozen=True)
class ProbabilityPartition:
    active: float
    tail: tuple = field(default=())
    remainder: float = 0.0
    eps_trunc: float = EPS_TRUNC

    def __post_init__(self):
        tail = tuple(float(m) for m in self.tail)
        object.__setattr__(self, "tail", tail)
        if not 0 < self.active <= 1:
            raise ValueError(f"active part {self.active!r} outside (0, 1]")
        if any(b > a for a, b in zip(tail, tail[1:])):
            raise ValueError("tail must be non-increasing")
        if tail and tail[-1] <= self.eps_trunc:
            raise ValueError("tail parts must exceed the truncation threshold")
        if self.remainder < 0:
            raise ValueError("negative remainder")
        if abs(self.total() - 1) > 1e-12:
            raise ValueError(f"masses sum to {self.total()!r}, not 1")

    def total(self):
        return self.active + sum(self.tail) + self.remainder

    def parts(self):
        return (self.active,) + self.tail


def sample_gem1(rng, eps_trunc=EPS_TRUNC):
    """Stick-breaking with Uniform(0,1) sticks; returns ``(masses, remainder)``."""
    if not 0 < eps_trunc < 1:
        raise ValueError("eps_trunc must lie in (0, 1)")
    masses = []
    residual = 1.0
    while residual >= eps_trunc:
        w = rng.random()
        masses.append(residual * w)
        residual *= 1.0 - w
    return np.array(masses), residual


def sample_pd1(rng, eps_trunc=EPS_TRUNC):
    """Decreasing rearrangement of a truncated GEM(1) sample."""
    masses, _ = sample_gem1(rng, eps_trunc)
    return np.sort(masses)[::-1]


def size_biased_pick(masses, rng):
    """Index ``I`` with ``S_{I-1} <= u < S_I`` for one uniform ``u``; returns ``(I, mass)``."""
    masses = np.asarray(masses, dtype=float)
    cum = np.cumsum(masses)
    if cum.size == 0 or cum[-1] <= 0:
        raise ValueError("degenerate partition")
    u = rng.random()
    i = int(np.searchsorted(cum, u, side="right"))
    if i >= len(masses):
        i = int(np.flatnonzero(masses)[-1])
    return i, float(masses[i])


def sample_mu(rng, eps_trunc=EPS_TRUNC):
    """Active part ``W_1``, tail the ranked remaining GEM(1) pieces."""
    masses, _ = sample_gem1(rng, eps_trunc)
    tail = [m for m in masses[1:] if m > eps_trunc]
    active = float(masses[0])
    remainder = 1.0 - active - float(sum(tail))
    return ProbabilityPartition(active, tuple(sorted(tail, reverse=True)), remainder, eps_trunc)


def split_merge_step(p, u):
    """One split-and-merge step; raises ``RemainderHit`` when ``u`` selects the remainder."""
    if u <= p.active:
        fragment = p.active - u
        if fragment > p.eps_trunc:
            tail = insert_ranked(RankedMassVector(0.0, p.tail), fragment).tail
            remainder = p.remainder
        else:
            tail, remainder = p.tail, p.remainder + fragment
        return ProbabilityPartition(u, tail, remainder, p.eps_trunc)
    cum = p.active
    for j, m in enumerate(p.tail):
        cum += m
        if u <= cum:
            return ProbabilityPartition(
                p.active + m, p.tail[:j] + p.tail[j + 1 :], p.remainder, p.eps_trunc
            )
    raise RemainderHit(f"u={u} fell in the truncation remainder {p.remainder:g}")


# batched forms: active (R,), tail (R, L) descending and zero padded, remainder (R,)


def sample_mu_batch(rng, size, eps_trunc=EPS_TRUNC):
    """``size`` draws from ``mu`` as arrays ``(active, tail, remainder)``."""
    width = 64
    w = rng.random((size, width))
    residual = np.cumprod(1.0 - w, axis=1)
    while np.any(residual[:, -1] >= eps_trunc):
        more = rng.random((size, width))
        w = np.concatenate([w, more], axis=1)
        residual = np.cumprod(1.0 - w, axis=1)
    before = np.concatenate([np.ones((size, 1)), residual[:, :-1]], axis=1)
    pieces = before * w
    # keep sticks up to and including the first one leaving residual < eps
    stop = np.argmax(residual < eps_trunc, axis=1)
    live = np.arange(w.shape[1])[None, :] <= stop[:, None]
    pieces = np.where(live, pieces, 0.0)
    active = pieces[:, 0].copy()
    tail = pieces[:, 1:]
    tail = np.where(tail > eps_trunc, tail, 0.0)
    tail = -np.sort(-tail, axis=1)
    tail = _trim(tail)
    remainder = 1.0 - active - tail.sum(axis=1)
    return active, tail, remainder


def sample_pd1_batch(rng, size, eps_trunc=EPS_TRUNC):
    """Ranked GEM(1) pieces (PD(1)), one row per sample."""
    active, tail, _ = sample_mu_batch(rng, size, eps_trunc)
    full = np.concatenate([active[:, None], tail], axis=1)
    return _trim(-np.sort(-full, axis=1))


def _trim(tail):
    nz = np.flatnonzero(tail.any(axis=0))
    return tail[:, : (nz[-1] + 1 if nz.size else 0)]


def split_merge_step_batch(active, tail, remainder, u, eps_trunc=EPS_TRUNC):
    """Vectorized :func:`split_merge_step`; returns ``(active, tail, remainder, hit)``.

    Rows with ``hit`` set are left unchanged.
    """
    active = active.copy()
    remainder = remainder.copy()
    rows = np.arange(len(active))
    split = u <= active
    cum = active[:, None] + np.cumsum(tail, axis=1)
    j = np.sum(cum < u[:, None], axis=1)
    ok_merge = ~split & (j < tail.shape[1])
    if tail.shape[1]:
        jj = np.minimum(j, tail.shape[1] - 1)
        ok_merge &= tail[rows, jj] > 0
    hit = ~split & ~ok_merge

    fragment = np.where(split, active - u, 0.0)
    big = fragment > eps_trunc
    remainder += np.where(split & ~big, fragment, 0.0)
    new_col = np.where(split & big, fragment, 0.0)
    tail = tail.copy()
    if tail.shape[1]:
        m = np.flatnonzero(ok_merge)
        active[m] += tail[m, j[m]]
        tail[m, j[m]] = 0.0
    active = np.where(split, u, active)
    tail = np.concatenate([tail, new_col[:, None]], axis=1)
    tail = _trim(-np.sort(-tail, axis=1))
    return active, tail, remainder, hit


def _stack_padded(tails):
    width = max(t.shape[1] for t in tails)
    return np.concatenate([np.pad(t, ((0, 0), (0, width - t.shape[1]))) for t in tails])


def _largest_two(active, tail):
    full = np.concatenate([active[:, None], tail, np.zeros((len(active), 1))], axis=1)
    full = -np.sort(-full, axis=1)
    return full[:, 0], full[:, 1], np.sum(full > 0.05, axis=1)


@dataclass
class StationarityReport:
    replications: int
    chain_steps: int
    seed: int
    results: list
    remainder_hits: int
    largest_mean: dict
    largest_var: dict

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def as_dict(self):
        return {
            "replications": self.replications,
            "chain_steps": self.chain_steps,
            "seed": self.seed,
            "statistics": [
                {
                    "name": r.name,
                    "n_samples": r.n_samples,
                    "ks_stat": r.statistic,
                    "threshold": r.threshold,
                    "pass": r.passed,
                }
                for r in self.results
            ],
            "remainder_hits": self.remainder_hits,
            "largest_mean": self.largest_mean,
            "largest_var": self.largest_var,
        }


def _evolved_block(seed, block, size, chain_steps, eps_trunc):
    a, t, r = sample_mu_batch(_rng.stream(seed, _rng.MODEL, block), size, eps_trunc)
    urng = _rng.stream(seed, _rng.UNIFORMS, block)
    flagged = np.zeros(size, dtype=bool)
    for _ in range(chain_steps):
        a, t, r, hit = split_merge_step_batch(a, t, r, urng.random(size), eps_trunc)
        flagged |= hit
    fa, ft, _ = sample_mu_batch(_rng.stream(seed, _rng.FRESH, block), size, eps_trunc)
    return a, t, flagged, fa, ft


def stationarity_experiment(replications, chain_steps, seed=_rng.DEFAULT_SEED,
                            eps_trunc=EPS_TRUNC, threads=1):
    """Draw from ``mu``, apply ``chain_steps`` steps, compare with fresh draws."""
    if replications < 10_000:
        raise ValueError("need at least 10^4 replications")
    sizes = [BLOCK] * (replications // BLOCK)
    if replications % BLOCK:
        sizes.append(replications % BLOCK)
    jobs = list(enumerate(sizes))

    def run(job):
        return _evolved_block(seed, job[0], job[1], chain_steps, eps_trunc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run, jobs))
    else:
        blocks = [run(job) for job in jobs]

    active = np.concatenate([b[0] for b in blocks])
    tail = _stack_padded([b[1] for b in blocks])
    flagged = np.concatenate([b[2] for b in blocks])
    fresh_active = np.concatenate([b[3] for b in blocks])
    fresh_tail = _stack_padded([b[4] for b in blocks])

    keep = ~flagged
    act = active[keep]
    l1, l2, cnt = _largest_two(act, tail[keep])
    f1, f2, fcnt = _largest_two(fresh_active, fresh_tail)

    results = [
        ks_statistic(act, uniform_cdf, name="active_vs_uniform"),
        ks_statistic(fresh_active, uniform_cdf, name="fresh_active_vs_uniform"),
        two_sample_ks(fresh_active, act, name="active_fresh_vs_evolved"),
        two_sample_ks(f1, l1, name="largest_fresh_vs_evolved"),
        two_sample_ks(f2, l2, name="second_fresh_vs_evolved"),
        two_sample_ks(fcnt, cnt, name="count_above_0.05_fresh_vs_evolved"),
    ]
    return StationarityReport(
        replications,
        chain_steps,
        seed,
        results,
        int(flagged.sum()),
        {"fresh": float(f1.mean()), "evolved": float(l1.mean())},
        {"fresh": float(f1.var()), "evolved": float(l1.var())},
    )
