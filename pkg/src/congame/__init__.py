"""Exact solvers for two-player concurrent stochastic games.

Reachability and safety objectives, value iteration, strategy improvement
for both objectives, a convergent k-uniform safety variant, and a two-sided
epsilon certifier.  All arithmetic is exact rational.
"""

from .model import (
    GameError,
    GameStructure,
    Selector,
    TurnBasedGame,
    Valuation,
    ValueClassIndex,
    destinations,
    encode_turn_based_as_concurrent,
    is_turn_based,
    indicator,
    make_absorbing,
    pure_selector,
    swap_players,
    uniform_selector,
    validate_selector,
    validate_valuation,
    value_classes,
)
from .gamefile import GameFormatError, load_game, parse_game, serialize_game
from .matrix import (
    MatrixGame,
    MatrixSolution,
    enumerate_k_uniform,
    one_step_matrix,
    pre1,
    pre1_k,
    pre1_sel,
    pre_sel_sel,
    solve_matrix_game,
)
from .mdp import (
    EndComponent,
    EndComponentSet,
    ImproperSelectorError,
    InducedMDP,
    almost_sure_safe_concurrent,
    compute_W2,
    induce_mdp,
    is_proper,
    improper_witness,
    max_reach_values,
    mec_decomposition,
    strategy_value_reach,
    strategy_value_safety,
    tb_almost_sure_safe,
    tb_attractor,
)
from .value_iter import (
    HypothesisViolation,
    IterationTrace,
    NotAFixpoint,
    eta_is_value_achieving,
    extract_eta_selector,
    extract_optimal_safety_selector,
    reach_value_iteration,
    safety_value_iteration_upper,
)
from .reach_si import (
    ReachSIResult,
    ReachSIRunner,
    ReachSIState,
    STATUS_CAPPED,
    STATUS_EPS,
    STATUS_EXACT,
    TurnBasedReachResult,
    improve_step_reach,
    run_reach_si,
    run_reach_si_turn_based,
)
from .safety_si import (
    ConvergentResult,
    ConvergentSafetyRunner,
    KUniformResult,
    SafetySIResult,
    SafetySIState,
    SupportPair,
    TBReduction,
    opt_sel_count,
    opt_sel_feasible,
    round_to_k_uniform,
    run_convergent_safety_si,
    run_k_uniform_si,
    run_safety_si,
    safety_si_step,
    tb_reduction,
)
from .certify import (
    DeterminacyReport,
    ValueBracket,
    approximate_game_value,
    check_determinacy_bracket,
)

__all__ = [name for name in dir() if not name.startswith("_")]
