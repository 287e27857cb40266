"""Simulation lab for adversarial multi-armed bandits with stochastic
constraints: soft- and hard-constraint log-barrier OMD learners, their
safe-space machinery, an exact LP benchmark, instance generators, and a
seeded experiment harness."""

from .algorithms import (
    ColbLearner,
    ColbState,
    DoublingLearner,
    SolbLearner,
    SolbState,
    colb_init,
    colb_round,
    combination_factor,
    doubling_eta_wrapper,
    solb_init,
    solb_round,
    theoretical_eta,
)
from .environments import (
    BallSpec,
    LowerBoundParams,
    ball_membership,
    lb_instance,
    sample_costs,
    smallloss_family,
)
from .errors import ConfigError, ConvergenceError, InfeasibleError, SlaterViolationError
from .estimation import (
    EstimatorState,
    SafeSpaceSpec,
    clean_event_holds,
    confidence_radius,
    safe_space,
    truncated_safe_space,
)
from .harness import (
    RunConfig,
    RunMetrics,
    compute_regret,
    compute_violations,
    emit_outputs,
    run,
    run_single,
    sweep,
)
from .lp import (
    LpSolution,
    Polytope,
    feasibility_check,
    grid_oracle,
    solve_max_margin,
    solve_offline_opt,
)
from .model import (
    FeasibleAnchor,
    InstanceSpec,
    RoundRecord,
    Strategy,
    importance_loss_estimate,
    mix,
    sample_action,
    uniform_strategy,
)
from .omd import (
    LrSchedule,
    bregman,
    init_schedule,
    kkt_residual,
    log_barrier_value,
    lr_update,
    omd_step,
)

__version__ = "0.1.0"
