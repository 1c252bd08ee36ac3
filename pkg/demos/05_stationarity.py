# %% [markdown]
# Split-and-merge on probability partitions leaves the law mu invariant.

# %%
import numpy as np

from randstir import _rng
from randstir.stationary import sample_mu, sample_pd1_batch, split_merge_step, stationarity_experiment

# %%
rng = _rng.stream(8)
p = sample_mu(rng)
print("active", round(p.active, 4), "tail", np.round(p.tail[:5], 4), "remainder", p.remainder)
for u in rng.random(5):
    p = split_merge_step(p, u)
    print(f"u={u:.3f} -> active {p.active:.4f}, {len(p.tail)} tail parts")

# %%
pd1 = sample_pd1_batch(_rng.stream(9), 100_000)
print("mean largest part:", pd1[:, 0].mean())

# %%
for steps in (1, 50):
    report = stationarity_experiment(100_000, steps)
    print(f"after {steps} steps: passed={report.passed}, remainder hits={report.remainder_hits}")
    for r in report.results:
        print("  ", r.line())
