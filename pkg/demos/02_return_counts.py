# %% [markdown]
# Return counts of the stirring ball over sqrt(n) * T steps, against Poisson(T^2/2).

# %%
import numpy as np

from randstir import _rng
from randstir.stats import poisson_binned
from randstir.stirring import returns_law, returns_limit_experiment, sample_returns

T = 2.0

# %%
for n in (100, 10_000, 1_000_000):
    steps = int(np.floor(np.sqrt(n) * T))
    law = returns_law(n, steps)
    k = np.arange(len(law))
    mean, var = (k * law).sum(), (k * k * law).sum() - (k * law).sum() ** 2
    print(f"n={n:>8d}  exact mean {mean:.4f}  var {var:.4f}")
print("Poisson(2):", poisson_binned(2.0, 6).round(4))

# %%
paths = sample_returns(10_000, 200, [_rng.stream(3, r) for r in range(20_000)])
print("simulated:", np.bincount(paths[:, -1], minlength=7)[:7] / len(paths))

# %%
# finite n is visibly underdispersed; the test has real power at 1e5 runs
for res in returns_limit_experiment(10_000, T, 100_000):
    print(res.line())
