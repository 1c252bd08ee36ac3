# %% [markdown]
# Coupling the n-th chain with the limit process and measuring how far apart they are.

# %%
import math

import numpy as np

from randstir.coupling import aligned_sup_distance, convergence_experiment, couple, make_driver

# %%
run = couple(make_driver(10_000, 2.0, seed=11, replication=3))
print("corrections:", run.corrections)
print("jump match:", run.jump_match)
print("sup distance:", run.sup_distance)
print("aligned distance:", aligned_sup_distance(run))

# %%
# The raw sup includes the lag between a jump and the next grid point, where
# the two paths sit on opposite sides of the same jump. Its median stalls.
res = convergence_experiment([100, 1000, 10_000, 100_000], 2.0, 300)
for row in res.rows:
    print(row)
print("slope of median sup:", round(res.slope, 3))

# %%
# Comparing after matching jumps shows the n^(-1/2) rate.
summary = res.aligned_summary()
print("aligned medians:", summary["median"])
print("aligned slope:", round(summary["slope"], 3))
for n in (100, 1000, 10_000, 100_000):
    print(n, "log n / sqrt n =", round(math.log(n) / math.sqrt(n), 4))
