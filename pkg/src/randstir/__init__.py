"""Random stirring permutations and their split-and-merge scaling limit."""

__version__ = "0.1.0"

from .state import (
    RankedMassVector,
    distance,
    insert_ranked,
    remove_tail_component,
    select_component,
)
from .stirring import (
    DirectPermutationState,
    ReducedChainState,
    cycle_vector,
    enumerate_exact,
    reduced_exact,
    step_direct,
    step_reduced,
)
from .limit import JumpClock, LimitTrajectory, evolve_limit, sample_jump_times, state_at
from .coupling import (
    CouplingDriver,
    aligned_sup_distance,
    build_discrete_returns,
    convergence_experiment,
    couple,
    evolve_coupled_discrete,
    make_driver,
    sup_distance,
)
from .stationary import (
    ProbabilityPartition,
    sample_gem1,
    sample_mu,
    sample_pd1,
    size_biased_pick,
    split_merge_step,
    stationarity_experiment,
)
