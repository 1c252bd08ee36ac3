"""Continuous-time split-and-merge limit process.

Jumps arrive as an inhomogeneous Poisson process with intensity ``t``;
between jumps the active coordinate grows at unit speed.  At the k-th jump
the uniform ``U_k`` picks the active coordinate (split at ``U_k * total``)
or a tail component (merged into the active one).
"""

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from ._rng import as_uniforms
from .stats import poisson_count_gof
from .state import RankedMassVector, insert_ranked, remove_tail_component, select_component

SPLIT = "split"
MERGE = "merge"


@dataclass(frozen=True)
class JumpClock:
    horizon: float
    jump_times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.jump_times, dtype=float)
        if times.size and (times[0] <= 0 or times[-1] > self.horizon or np.any(np.diff(times) <= 0)):
            raise ValueError("jump times must be strictly increasing in (0, horizon]")
        object.__setattr__(self, "jump_times", times)

    def __len__(self):
        return len(self.jump_times)

    def count(self, t):
        """Number of jumps in ``[0, t]``."""
        return int(np.searchsorted(self.jump_times, t, side="right"))


def cumulative_intensity(t):
    return 0.5 * t * t


def sample_jump_times(T, rng):
    """Jump times on ``(0, T]`` of a Poisson process with intensity ``t``.

    Time change of a unit-rate process: ``tau_k = sqrt(2 * Gamma_k)`` where
    ``Gamma_k`` are partial sums of standard exponentials.
    """
    if T <= 0:
        raise ValueError("horizon T must be positive")
    budget = cumulative_intensity(T)
    gammas = []
    g = 0.0
    while True:
        for e in rng.standard_exponential(8):
            g += e
            if g > budget:
                return JumpClock(T, np.sqrt(2.0 * np.array(gammas)))
            gammas.append(g)


@dataclass(frozen=True)
class LimitEvent:
    k: int
    time: float
    u: float
    kind: str
    index: int  # 0 for a split, merged tail index otherwise
    state: RankedMassVector


@dataclass
class LimitTrajectory:
    clock: JumpClock
    events: list = field(default_factory=list)
    initial: RankedMassVector = RankedMassVector(0.0, ())

    @property
    def horizon(self):
        return self.clock.horizon

    @property
    def event_times(self):
        return [e.time for e in self.events]


def evolve_limit(clock, uniforms, T=None):
    """Deterministic limit trajectory from a clock and ``uniforms[k]``, k >= 1.

    ``uniforms`` may be any object indexable from 1 (``UniformStream``) or a
    plain sequence, in which case ``uniforms[k-1]`` drives jump ``k``.
    """
    T = clock.horizon if T is None else T
    uniforms = as_uniforms(uniforms)
    traj = LimitTrajectory(clock)
    state, last = traj.initial, 0.0
    for k, tau in enumerate(clock.jump_times, start=1):
        if tau > T:
            break
        tau = float(tau)
        before = state.with_active(state.active + (tau - last))
        u = uniforms[k]
        j = select_component(before, u)
        if j == 0:
            total = before.total()
            keep = u * total
            fragment = before.active - keep
            if fragment < 0:
                fragment = 0.0
            state = insert_ranked(before.with_active(keep), fragment)
            kind = SPLIT
        else:
            rest, mass = remove_tail_component(before, j)
            state = rest.with_active(before.active + mass)
            kind = MERGE
        if k == 1 and kind != SPLIT:
            raise AssertionError("first jump must be a split")
        traj.events.append(LimitEvent(k, tau, u, kind, j, state))
        last = tau
    return traj


def _check_time(traj, t):
    if not 0 <= t <= traj.horizon:
        raise ValueError(f"t={t} outside [0, {traj.horizon}]")


def state_at(traj, t):
    """Right-continuous state at time ``t``."""
    _check_time(traj, t)
    k = bisect_right(traj.event_times, t)
    if k == 0:
        return RankedMassVector(float(t), ())
    ev = traj.events[k - 1]
    return ev.state.with_active(ev.state.active + (t - ev.time))


def state_before(traj, t):
    """Left limit of the state at ``t`` (equal to :func:`state_at` off jump times)."""
    _check_time(traj, t)
    k = bisect_left(traj.event_times, t)
    if k == 0:
        return RankedMassVector(float(t), ())
    ev = traj.events[k - 1]
    return ev.state.with_active(ev.state.active + (t - ev.time))


def event_log(traj):
    """Event records ``(k, tau_k, U_k, kind, active_after, tail_after)``."""
    return [
        {
            "k": e.k,
            "tau": e.time,
            "u": e.u,
            "kind": e.kind if e.kind == SPLIT else f"merge({e.index})",
            "active": e.state.active,
            "tail": list(e.state.tail),
        }
        for e in traj.events
    ]


def check_trajectory(traj, times=None, rtol=1e-9):
    """Count violations of the mass identity and tail ranking; 0 means clean."""
    bad = 0
    if times is None:
        times = [0.0, traj.horizon] + traj.event_times
    for t in times:
        for s in (state_at(traj, t), state_before(traj, t)):
            if abs(s.total() - t) > rtol * max(t, 1e-300) and t > 0:
                bad += 1
    for e in traj.events:
        tail = e.state.tail
        if any(b > a for a, b in zip(tail, tail[1:])) or any(m < 0 for m in tail):
            bad += 1
    return bad


def limit_experiment(T, replications, seed=_rng.DEFAULT_SEED):
    """Simulate limit trajectories; return ``(event records, jump-count GOF, violations)``.

    Replication ``r`` uses the same clock and uniform streams as replication
    ``r`` of the coupling experiment.  The GOF is ``None`` below 1000 runs.
    """
    records, counts, bad = [], [], 0
    for r in range(replications):
        clock = sample_jump_times(T, _rng.stream(seed, r, _rng.CLOCK))
        traj = evolve_limit(clock, _rng.UniformStream(_rng.stream(seed, r, _rng.UNIFORMS)), T)
        bad += check_trajectory(traj)
        counts.append(len(clock))
        for rec in event_log(traj):
            records.append({"rep": r, **rec})
    gof = None
    if replications >= 1000:
        gof = poisson_count_gof(counts, cumulative_intensity(T), name="jump_count_vs_Poisson")
    return records, gof, bad
