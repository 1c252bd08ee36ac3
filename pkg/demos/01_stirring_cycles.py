# %% [markdown]
# Stirring a permutation: the direct model, the reduced chain, and their exact laws.

# %%
from randstir import _rng
from randstir.stirring import (DirectPermutationState, cycle_vector, enumerate_exact,
                               reduced_exact, simulate_reduced, total_variation)

# %%
# drive ball 0 by hand
s = DirectPermutationState(6)
for x in [3, 1, 3, 0, 5]:
    tag = s.apply_choice(x)
    print(s.step, tag, s.place.tolist(), cycle_vector(s), "visited", s.visited_places)

# %%
# exact laws after 4 steps on 4 places
direct = enumerate_exact(4, 4)
reduced = reduced_exact(4, 4)
for v in sorted(direct, key=lambda v: (-v.active, v.tail)):
    print(f"{str(v):10s} {direct[v]}")
print("total variation:", total_variation(direct, reduced))

# %%
# one simulated trajectory of the reduced chain, as dump records
for rec in simulate_reduced(100, 25, _rng.stream(1)):
    if rec["event"] != "grow":
        print(rec)
