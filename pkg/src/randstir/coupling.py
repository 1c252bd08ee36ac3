"""Joint realization of the limit process and the n-th discrete chain.

One jump clock and one uniform stream drive both processes.  The discrete
return indicators are read off the clock in windows of length ``1/sqrt(n)``
and corrected with auxiliary uniforms so that they have exactly the
return law of the stirring walk.  The k-th discrete return reuses ``U_k``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .limit import evolve_limit, sample_jump_times
from .stirring import FICTIVE, GROW, INITIAL_CYCLES, apply_return
from .stats import loglog_slope

SUPPRESS = "suppress"
ADD = "add"

TABLE_COLUMNS = (
    "n",
    "replications",
    "T",
    "q50",
    "q90",
    "q99",
    "correction_rate",
    "fictive_rate",
    "jump_match_rate",
    "seed",
)


def horizon_steps(n, T):
    """Number of discrete steps ``floor(sqrt(n) * T)`` covering ``[0, T]``."""
    return math.floor(math.sqrt(n) * T)


def grid_times(n, T):
    return np.arange(horizon_steps(n, T) + 1) / math.sqrt(n)


def bernoulli_param_p(i, n):
    """Probability that the clock jumps in ``((i-1)/sqrt(n), i/sqrt(n)]``."""
    return -math.expm1(-(2 * i - 1) / (2 * n))


def bernoulli_param_q(i, n, v_prev):
    """Return probability of the stirring walk at step ``i`` given ``V_{i-1}``."""
    return (i - v_prev) / n


@dataclass
class CouplingDriver:
    n: int
    T: float
    clock: object
    uniforms: object  # indexable from 1
    aux: np.ndarray  # aux[i-1] is the correction uniform of window i

    def __post_init__(self):
        self.uniforms = _rng.as_uniforms(self.uniforms)
        if len(self.aux) < horizon_steps(self.n, self.T):
            raise ValueError("not enough auxiliary uniforms for the horizon")


def make_driver(n, T, seed=_rng.DEFAULT_SEED, replication=0, clock=None, uniforms=None):
    """Driver for replication ``replication``; clock and uniforms do not depend on ``n``."""
    if clock is None:
        clock = sample_jump_times(T, _rng.stream(seed, replication, _rng.CLOCK))
    if uniforms is None:
        uniforms = _rng.UniformStream(_rng.stream(seed, replication, _rng.UNIFORMS))
    aux = _rng.stream(seed, replication, _rng.AUX, n).random(horizon_steps(n, T))
    return CouplingDriver(n, T, clock, uniforms, aux)


def jump_indicators(driver):
    """``X[i] = 1`` iff the clock jumps in window ``i``; ``X[0]`` is unused."""
    grid = grid_times(driver.n, driver.T)
    x = np.zeros(len(grid), dtype=np.int8)
    idx = np.searchsorted(grid, driver.clock.jump_times, side="left")
    x[idx[idx < len(grid)]] = 1
    return x


def build_discrete_returns(driver):
    """Corrected return counts ``V[0..N]`` and the list of ``(i, kind)`` corrections."""
    n = driver.n
    steps = horizon_steps(n, driver.T)
    x = jump_indicators(driver).tolist()
    z = driver.aux.tolist()
    v = [0] * (steps + 1)
    corrections = []
    for i in range(1, steps + 1):
        p = bernoulli_param_p(i, n)
        q = (i - v[i - 1]) / n
        y = x[i]
        if y and p > q and z[i - 1] > q / p:
            y = 0
            corrections.append((i, SUPPRESS))
        elif not y and p < q and z[i - 1] < (q - p) / (1 - p):
            y = 1
            corrections.append((i, ADD))
        v[i] = v[i - 1] + y
    return np.array(v, dtype=np.int64), corrections


@dataclass
class DiscreteTrajectory:
    """Event-compressed discrete path; growth steps are implicit."""

    n: int
    returns: np.ndarray
    event_steps: list = field(default_factory=lambda: [0])
    tags: list = field(default_factory=lambda: ["init"])
    states: list = field(default_factory=lambda: [INITIAL_CYCLES])

    @property
    def steps(self):
        return len(self.returns) - 1

    def state(self, i):
        if not 0 <= i <= self.steps:
            raise IndexError(i)
        e = int(np.searchsorted(self.event_steps, i, side="right")) - 1
        s = self.states[e]
        return s.with_active(s.active + (i - self.event_steps[e]))

    def records(self):
        """Per-step dump records (step, V, active, tail, event)."""
        out = []
        events = dict(zip(self.event_steps, self.tags))
        for i in range(self.steps + 1):
            s = self.state(i)
            out.append(
                {
                    "step": i,
                    "V": int(self.returns[i]),
                    "active": s.active,
                    "tail": list(s.tail),
                    "event": events.get(i, GROW),
                }
            )
        return out

    @property
    def fictive_count(self):
        return self.tags.count(FICTIVE)


def evolve_coupled_discrete(driver, returns):
    """Discrete cycle process driven by ``returns`` and the shared uniforms."""
    returns = np.asarray(returns)
    steps = horizon_steps(driver.n, driver.T)
    inc = np.diff(returns)
    if len(returns) != steps + 1 or returns[0] != 0 or np.any((inc != 0) & (inc != 1)):
        raise ValueError("return sequence does not match the driver")
    traj = DiscreteTrajectory(driver.n, returns)
    state, last = INITIAL_CYCLES, 0
    for i in np.flatnonzero(inc) + 1:
        i = int(i)
        before = state.with_active(state.active + (i - 1 - last))
        k = int(returns[i])
        state, tag = apply_return(before, driver.uniforms[k])
        if state.total() != i + 1 - k:
            raise AssertionError(f"mass identity broken at step {i}")
        traj.event_steps.append(i)
        traj.tags.append(tag)
        traj.states.append(state)
        last = i
    end = traj.state(steps)
    if end.total() != steps + 1 - returns[-1]:
        raise AssertionError("mass identity broken at the horizon")
    return traj


@dataclass
class CoupledRun:
    n: int
    T: float
    continuous: object
    discrete: DiscreteTrajectory
    corrections: list
    sup_distance: float = float("nan")
    jump_match: bool = False

    @property
    def fictive_split_count(self):
        return self.discrete.fictive_count


def _padded(states, width):
    out = np.zeros((len(states), width))
    for r, s in enumerate(states):
        out[r, : len(s)] = list(s)
    return out


class _Paths:
    """Both paths as padded state matrices, for vectorized distance evaluation."""

    def __init__(self, run):
        self.root = math.sqrt(run.n)
        self.grid = grid_times(run.n, run.T)
        events = [e for e in run.continuous.events if e.time <= run.T]
        self.taus = np.array([e.time for e in events])
        self.c_times = np.concatenate([[0.0], self.taus])
        c_states = [run.continuous.initial] + [e.state for e in events]
        self.d_steps = np.array(run.discrete.event_steps)
        width = max(max(len(s) for s in c_states), max(len(s) for s in run.discrete.states))
        self.cm = _padded(c_states, width)
        self.dm = _padded(run.discrete.states, width)

    def gap(self, t, kc, idx):
        """Max over rows of ``d(C at time t in phase kc, discrete state idx / sqrt(n))``."""
        if len(t) == 0:
            return 0.0
        pd = np.searchsorted(self.d_steps, idx, side="right") - 1
        c = self.cm[kc].copy()
        c[:, 0] += t - self.c_times[kc]
        d = self.dm[pd].copy()
        d[:, 0] += idx - self.d_steps[pd]
        return float(np.abs(np.cumsum(c - d / self.root, axis=1)).max())


def sup_distance(run):
    """Exact ``sup_{t<=T} d(C(t), C^(n)(floor(sqrt(n) t)) / sqrt(n))``.

    Between breakpoints (grid points ``i/sqrt(n)``, jump times and ``T``)
    every partial-sum gap is affine in ``t``, so the sup is attained at a
    one-sided limit at some breakpoint.  Both one-sided values are evaluated
    at every breakpoint.
    """
    paths = _Paths(run)
    points = np.unique(np.concatenate([paths.grid, paths.taus, [run.T]]))
    best = 0.0
    for b, side in ((points, "right"), (points[1:], "left")):
        kc = np.searchsorted(paths.taus, b, side=side)
        idx = np.searchsorted(paths.grid, b, side=side) - 1
        best = max(best, paths.gap(b, kc, idx))
    return best


def aligned_sup_distance(run):
    """Sup distance after moving each discrete jump onto its continuous partner.

    The discrete path is read through the piecewise-linear time change that
    sends ``tau_k`` to the k-th discrete jump time (shifting time by at most
    ``1/sqrt(n)`` when the jumps match).  Returns ``inf`` when the jump counts
    differ and no such matching exists.
    """
    if not jump_match(run):
        return math.inf
    paths = _Paths(run)
    jumps = np.flatnonzero(np.diff(run.discrete.returns)) + 1
    anchors_d = np.concatenate([[0.0], paths.grid[jumps]])
    anchors_c = np.concatenate([[0.0], paths.taus])
    if anchors_d[-1] < run.T:
        anchors_d = np.append(anchors_d, run.T)
        anchors_c = np.append(anchors_c, run.T)
    steps = np.arange(len(paths.grid))
    s = np.interp(paths.grid, anchors_d, anchors_c)
    s[jumps] = paths.taus  # exact anchors
    # phase of the continuous path at each grid preimage: jumps already passed
    k_right = np.searchsorted(jumps, steps, side="right")
    k_left = np.searchsorted(jumps, steps, side="left")
    best = paths.gap(s, k_right, steps)
    best = max(best, paths.gap(s[1:], k_left[1:], steps[1:] - 1))
    # right end of the horizon
    end = np.array([run.T])
    best = max(best, paths.gap(end, np.array([len(paths.taus)]), np.array([steps[-1]])))
    return best


def discrete_mass_violations(traj):
    """Steps ``i`` where the cycle lengths do not sum to ``i + 1 - V_i``."""
    steps = np.arange(traj.steps + 1)
    e = np.searchsorted(traj.event_steps, steps, side="right") - 1
    totals = np.array([s.total() for s in traj.states])[e] + (steps - np.array(traj.event_steps)[e])
    return int(np.count_nonzero(totals != steps + 1 - traj.returns))


def limit_mass_violations(run, rtol=1e-9):
    """Breakpoints where the limit state's mass differs from ``t`` by more than ``rtol * t``."""
    paths = _Paths(run)
    points = np.unique(np.concatenate([paths.grid, paths.taus, [run.T]]))
    bad = 0
    for side in ("right", "left"):
        kc = np.searchsorted(paths.taus, points, side=side)
        mass = paths.cm[kc].sum(axis=1) + (points - paths.c_times[kc])
        bad += int(np.count_nonzero(np.abs(mass - points) > rtol * points))
    return bad


def jump_match(run):
    """Same number of jumps and every matched pair within ``1/sqrt(n)``."""
    taus = np.array([e.time for e in run.continuous.events if e.time <= run.T])
    v = run.discrete.returns
    if len(taus) != v[-1]:
        return False
    disc_times = np.flatnonzero(np.diff(v)) + 1
    grid = grid_times(run.n, run.T)
    return bool(np.all(np.abs(taus - grid[disc_times]) <= 1 / math.sqrt(run.n)))


def couple(driver, continuous=None):
    """Build both processes from one driver and measure their distance."""
    if continuous is None:
        continuous = evolve_limit(driver.clock, driver.uniforms, driver.T)
    returns, corrections = build_discrete_returns(driver)
    discrete = evolve_coupled_discrete(driver, returns)
    run = CoupledRun(driver.n, driver.T, continuous, discrete, corrections)
    run.sup_distance = sup_distance(run)
    run.jump_match = jump_match(run)
    return run


def map_replications(fn, replications, threads=1):
    """``[fn(r) for r in range(replications)]``, optionally on a thread pool."""
    if threads <= 1:
        return [fn(r) for r in range(replications)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replications)))


@dataclass
class ConvergenceResult:
    rows: list
    slope: float
    intercept: float
    r2: float
    sups: dict
    below_log_fraction: dict
    aligned: dict
    mass_violations: int = 0

    def aligned_summary(self):
        """Diagnostics of :func:`aligned_sup_distance` (not part of the table)."""
        ns = sorted(self.aligned)
        medians = [float(np.median(self.aligned[n])) for n in ns]
        out = {
            "median": {str(n): m for n, m in zip(ns, medians)},
            "below_log_fraction": {
                str(n): float(np.mean(self.aligned[n] < math.log(n) / math.sqrt(n))) for n in ns
            },
        }
        if len(ns) >= 3 and all(math.isfinite(m) and m > 0 for m in medians):
            out["slope"] = loglog_slope(ns, medians)[0]
        return out

    def summary(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "below_log_fraction": {str(k): v for k, v in self.below_log_fraction.items()},
            "aligned": self.aligned_summary(),
            "mass_violations": self.mass_violations,
        }


def convergence_experiment(n_list, T, replications, master_seed=_rng.DEFAULT_SEED, threads=1):
    """Distance quantiles and diagnostics of the coupling for each ``n``.

    Replication ``r`` uses the same clock and uniforms for every ``n``.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or min(n_list) < 4 or T <= 0:
        raise ValueError("need n >= 4 and T > 0")

    def one(r):
        clock = sample_jump_times(T, _rng.stream(master_seed, r, _rng.CLOCK))
        uniforms = _rng.UniformStream(_rng.stream(master_seed, r, _rng.UNIFORMS))
        continuous = evolve_limit(clock, uniforms, T)
        out = []
        for n in n_list:
            run = couple(make_driver(n, T, master_seed, r, clock, uniforms), continuous)
            violations = discrete_mass_violations(run.discrete) + limit_mass_violations(run)
            out.append((run.sup_distance, bool(run.corrections), run.fictive_split_count > 0,
                        run.jump_match, aligned_sup_distance(run), violations))
        return out

    results = map_replications(one, replications, threads)
    rows, sups, below, aligned = [], {}, {}, {}
    violations = sum(p[5] for res in results for p in res)
    for col, n in enumerate(n_list):
        per = [res[col] for res in results]
        s = np.sort(np.array([p[0] for p in per]))
        sups[n] = s
        below[n] = float(np.mean(s < math.log(n) / math.sqrt(n)))
        aligned[n] = np.sort(np.array([p[4] for p in per]))
        q50, q90, q99 = np.quantile(s, [0.5, 0.9, 0.99])
        rows.append(
            {
                "n": n,
                "replications": replications,
                "T": T,
                "q50": float(q50),
                "q90": float(q90),
                "q99": float(q99),
                "correction_rate": float(np.mean([p[1] for p in per])),
                "fictive_rate": float(np.mean([p[2] for p in per])),
                "jump_match_rate": float(np.mean([p[3] for p in per])),
                "seed": master_seed,
            }
        )
    if len(n_list) >= 3:
        slope, intercept, r2 = loglog_slope(n_list, [r["q50"] for r in rows])
    else:
        slope = intercept = r2 = float("nan")
    return ConvergenceResult(rows, slope, intercept, r2, sups, below, aligned, violations)


def returns_experiment(n_list, T, replications, master_seed=_rng.DEFAULT_SEED, threads=1):
    """Coupled return counts at ``T/2`` and ``T`` and correction indicators.

    Returns ``{n: (V at floor(sqrt(n) T / 2), V_N, had_correction)}`` as arrays.
    """

    def one(r):
        clock = sample_jump_times(T, _rng.stream(master_seed, r, _rng.CLOCK))
        out = []
        for n in n_list:
            v, corr = build_discrete_returns(make_driver(n, T, master_seed, r, clock, uniforms=[]))
            out.append((int(v[math.floor(math.sqrt(n) * T / 2)]), int(v[-1]), bool(corr)))
        return out

    results = map_replications(one, replications, threads)
    return {
        n: tuple(np.array([res[c][k] for res in results]) for k in range(3))
        for c, n in enumerate(n_list)
    }
