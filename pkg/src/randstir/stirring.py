"""The discrete random-stirring process.

Two models of the same chain live here:

* the direct model, which tracks the permutation produced by swapping the
  stirring ball (ball 0) with the ball at a uniformly chosen place;
* the reduced chain on ranked cycle lengths, driven by a return indicator
  and one uniform per return (floor rule for splits).

Both have exact, exhaustive oracles for tiny ``(n, steps)`` so that their
equality in law can be checked rather than assumed.
"""

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _rng
from .stats import poisson_count_gof, poisson_joint_gof
from .state import RankedMassVector, insert_ranked, remove_tail_component, select_component

GROW = "grow"
SPLIT = "split"
FICTIVE = "fictive"
MERGE = "merge"

INITIAL_CYCLES = RankedMassVector(1, ())


class BudgetExceededError(ValueError):
    pass


class DirectPermutationState:
    """Permutation of ``{0..n-1}`` built by stirring ball 0.

    ``place[b]`` is the current place of ball ``b`` and ``ball_at`` its
    inverse.  Cycles of the map ball -> place are tracked through a label per
    element and a size per label.
    """

    def __init__(self, n):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        self.step = 0
        self.returns = 0
        self.place = np.arange(n)
        self.ball_at = np.arange(n)
        self.label = np.arange(n)
        self.sizes = {b: 1 for b in range(n)}
        self.touched = [0]
        self.is_touched = np.zeros(n, dtype=bool)
        self.is_touched[0] = True
        self.visited = np.zeros(n, dtype=bool)
        self.visited[0] = True
        self._next_label = n

    @property
    def stirring_pos(self):
        return int(self.place[0])

    @property
    def visited_places(self):
        return int(self.visited.sum())

    def copy(self):
        new = object.__new__(DirectPermutationState)
        new.__dict__.update(self.__dict__)
        for name in ("place", "ball_at", "label", "is_touched", "visited"):
            setattr(new, name, getattr(self, name).copy())
        new.sizes = dict(self.sizes)
        new.touched = list(self.touched)
        return new

    def apply_choice(self, x):
        """Swap ball 0 with the ball at place ``x`` (in place); return event tag."""
        self.step += 1
        b = int(self.place[0])
        returned = bool(self.visited[x])
        if returned:
            self.returns += 1
        self.visited[x] = True
        if x == b:
            return FICTIVE
        y = int(self.ball_at[x])
        self.place[0], self.place[y] = x, b
        self.ball_at[x], self.ball_at[b] = 0, y
        if not self.is_touched[y]:
            self.is_touched[y] = True
            self.touched.append(y)
        # new map = old map composed with the transposition (0 y)
        la, ly = int(self.label[0]), int(self.label[y])
        if la != ly:
            small, big = (la, ly) if self.sizes[la] < self.sizes[ly] else (ly, la)
            self.label[self.label == small] = big
            self.sizes[big] += self.sizes.pop(small)
            return MERGE if returned else GROW
        new = self._next_label
        self._next_label += 1
        e, count = 0, 0
        while True:
            self.label[e] = new
            count += 1
            e = int(self.place[e])
            if e == 0:
                break
        self.sizes[new] = count
        self.sizes[la] -= count
        return SPLIT

    def is_bijection(self):
        return np.array_equal(np.sort(self.place), np.arange(self.n)) and np.array_equal(
            self.ball_at[self.place], np.arange(self.n)
        )


def step_direct(state, rng):
    """One stirring step on a copy of ``state``: uniform place, swap with ball 0."""
    new = state.copy()
    new.apply_choice(int(rng.integers(state.n)))
    return new


def cycle_vector(state):
    """Active cycle length plus ranked lengths of the other touched cycles."""
    active_label = int(state.label[0])
    others = {}
    for b in state.touched:
        lab = int(state.label[b])
        if lab != active_label:
            others[lab] = state.sizes[lab]
    return RankedMassVector.from_masses(state.sizes[active_label], others.values())


@dataclass(frozen=True)
class ReducedChainState:
    n: int
    cycles: RankedMassVector = INITIAL_CYCLES
    step: int = 0
    returns: int = 0

    @property
    def visited(self):
        return self.step + 1 - self.returns


def apply_return(cycles, u):
    """Split or merge ``cycles`` with the uniform ``u``; return ``(cycles, tag)``.

    Split sizes follow the floor rule: the new active length is
    ``floor(u * total)`` and a zero result is a fictive split.
    """
    total = cycles.total()
    j = select_component(cycles, u)
    if j == 0:
        keep = int(u * total)
        if keep == 0:
            return cycles, FICTIVE
        return insert_ranked(cycles.with_active(keep), cycles.active - keep), SPLIT
    rest, mass = remove_tail_component(cycles, j)
    return rest.with_active(cycles.active + mass), MERGE


def reduced_transition(state, returned, u=None):
    """Deterministic transition of the reduced chain given the driving variables."""
    if not returned:
        cycles, tag = state.cycles.with_active(state.cycles.active + 1), GROW
        return ReducedChainState(state.n, cycles, state.step + 1, state.returns), tag
    cycles, tag = apply_return(state.cycles, u)
    return ReducedChainState(state.n, cycles, state.step + 1, state.returns + 1), tag


def step_reduced(state, rng):
    """One step of the reduced chain: return w.p. ``visited/n``, else growth."""
    returned = int(rng.integers(state.n)) < state.visited
    u = rng.random() if returned else None
    return reduced_transition(state, returned, u)[0]


def enumerate_exact(n, steps, budget=10**7):
    """Exact law of ranked cycle vectors of the direct model after ``steps``.

    Walks all ``n**steps`` equally likely place sequences.  Probabilities are
    ``Fraction`` instances.
    """
    if n**steps > budget:
        raise BudgetExceededError(f"{n}**{steps} paths exceed the budget {budget}")
    weight = Fraction(1, n**steps)
    dist = defaultdict(Fraction)

    def walk(state, depth):
        if cycle_vector(state).total() != state.step + 1 - state.returns:
            raise AssertionError("cycle lengths do not sum to the visited count")
        if depth == steps:
            dist[cycle_vector(state)] += weight
            return
        for x in range(n):
            child = state.copy()
            child.apply_choice(x)
            walk(child, depth + 1)

    walk(DirectPermutationState(n), 0)
    return dict(dist)


def _return_cells(cycles):
    """Midpoints and widths of the u-intervals on which ``apply_return`` is constant."""
    total = cycles.total()
    cuts = {Fraction(0), Fraction(1)}
    cuts.update(Fraction(s, total) for s in cycles.partial_sums())
    cuts.update(Fraction(m, total) for m in range(cycles.active + 1))
    cuts = sorted(c for c in cuts if 0 <= c <= 1)
    return [((a + b) / 2, b - a) for a, b in zip(cuts, cuts[1:])]


def reduced_exact(n, steps):
    """Exact law of the reduced chain's cycle vector after ``steps``.

    Enumerates return/no-return and, on a return, every interval of ``u`` on
    which the split/merge outcome is constant, pushing each through
    :func:`reduced_transition`.
    """
    layer = {ReducedChainState(n): Fraction(1)}
    for _ in range(steps):
        nxt = defaultdict(Fraction)
        for state, prob in layer.items():
            p_ret = Fraction(state.visited, n)
            if p_ret < 1:
                nxt[reduced_transition(state, False)[0]] += prob * (1 - p_ret)
            if p_ret > 0:
                for u, width in _return_cells(state.cycles):
                    nxt[reduced_transition(state, True, u)[0]] += prob * p_ret * width
        layer = nxt
        if any(state.cycles.total() != state.visited for state in layer):
            raise AssertionError("cycle lengths do not sum to the visited count")
    dist = defaultdict(Fraction)
    for state, prob in layer.items():
        dist[state.cycles] += prob
    return dict(dist)


def total_variation(p, q):
    keys = set(p) | set(q)
    return sum(abs(p.get(k, 0) - q.get(k, 0)) for k in keys) / 2


def simulate_reduced(n, steps, rng):
    """Run the reduced chain; yield one dump record per step (step 0 included)."""
    state = ReducedChainState(n)
    yield trajectory_record(state, "init")
    for _ in range(steps):
        returned = int(rng.integers(n)) < state.visited
        u = rng.random() if returned else None
        state, tag = reduced_transition(state, returned, u)
        yield trajectory_record(state, tag)


def trajectory_record(state, tag):
    """Dump record: step, returns, active, ranked tail, event tag."""
    return {
        "step": state.step,
        "V": state.returns,
        "active": state.cycles.active,
        "tail": list(state.cycles.tail),
        "event": tag,
    }


def sample_returns(n, steps, rngs):
    """Return-count paths of the stirring walk, one row per generator.

    The walk returns at step ``i+1`` iff the uniformly chosen place is among
    the ``i+1-V_i`` visited ones; after relabelling places this is the draw
    ``x < visited`` with ``x`` uniform on ``{0..n-1}``.  Output has shape
    ``(len(rngs), steps + 1)`` with column 0 equal to zero.
    """
    draws = np.stack([g.integers(n, size=steps) for g in rngs]) if steps else None
    paths = np.zeros((len(rngs), steps + 1), dtype=np.int64)
    v = np.zeros(len(rngs), dtype=np.int64)
    for i in range(steps):
        v = v + (draws[:, i] < i + 1 - v)
        paths[:, i + 1] = v
    return paths


def returns_law(n, steps):
    """Exact law of ``V_steps`` for the stirring walk on ``n`` places (float DP)."""
    p = np.zeros(steps + 1)
    p[0] = 1.0
    for i in range(steps):
        v = np.arange(i + 1)
        r = np.clip((i + 1 - v) / n, 0.0, 1.0)
        q = np.zeros(steps + 1)
        q[: i + 1] += p[: i + 1] * (1 - r)
        q[1 : i + 2] += p[: i + 1] * r
        p = q
    return p


def returns_limit_experiment(n, T, replications, seed=_rng.DEFAULT_SEED, threads=1, block=10_000):
    """Poisson-limit checks on simulated return counts.

    Simulates ``replications`` stirring walks for ``floor(sqrt(n) T)`` steps
    and tests ``V`` at the horizon against Poisson(T^2/2), and the pair
    (``V`` at ``T/2``, increment to ``T``) against independent
    Poisson(T^2/8) and Poisson(3T^2/8) laws.
    """
    if n < 1 or T <= 0 or replications < 1:
        raise ValueError("need n >= 1, T > 0 and replications >= 1")
    steps = math.floor(math.sqrt(n) * T)
    mid = math.floor(math.sqrt(n) * T / 2)
    starts = range(0, replications, block)

    def run(start):
        stop = min(start + block, replications)
        rngs = [_rng.stream(seed, r, _rng.MODEL) for r in range(start, stop)]
        paths = sample_returns(n, steps, rngs)
        return paths[:, mid], paths[:, steps]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    v_mid = np.concatenate([p[0] for p in parts])
    v_end = np.concatenate([p[1] for p in parts])
    lam_mid, lam_end = (T / 2) ** 2 / 2, T**2 / 2
    return [
        poisson_count_gof(v_end, lam_end, name=f"V_at_T_vs_Poisson({lam_end:g})"),
        poisson_joint_gof(
            v_mid,
            v_end - v_mid,
            lam_mid,
            lam_end - lam_mid,
            name=f"increments_vs_Poisson({lam_mid:g})xPoisson({lam_end - lam_mid:g})",
        ),
    ]
