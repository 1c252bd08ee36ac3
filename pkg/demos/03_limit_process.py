# %% [markdown]
# The continuous split-and-merge process: a jump clock with intensity t plus one uniform per jump.

# %%
import numpy as np

from randstir import _rng
from randstir.limit import JumpClock, event_log, evolve_limit, sample_jump_times, state_at

# %%
traj = evolve_limit(JumpClock(2.0, [1.0, 1.5]), [0.4, 0.9])
for t in (0.5, 1.0, 1.25, 1.5, 2.0):
    print(t, state_at(traj, t))

# %%
clock = sample_jump_times(4.0, _rng.stream(5, 0, _rng.CLOCK))
traj = evolve_limit(clock, _rng.UniformStream(_rng.stream(5, 0, _rng.UNIFORMS)))
for rec in event_log(traj):
    print(f"{rec['tau']:.3f} {rec['kind']:9s} active={rec['active']:.3f} tail={np.round(rec['tail'], 3)}")

# %%
counts = [len(sample_jump_times(2.0, _rng.stream(6, r))) for r in range(20_000)]
print("mean jumps on [0, 2]:", np.mean(counts))
