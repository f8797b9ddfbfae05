"""Zero-sum stochastic games with varying stage duration."""

from .bounds import CHECK_IDS, CheckSpec, run_check, run_suite
from .ctmc import (
    apply_barT_h,
    discounted_integrated_payoff,
    discretized_discounted_value,
    discretized_finite_value,
    integrated_payoff,
    transition_semigroup,
)
from .evolution import (
    discounted_product,
    euler_scheme,
    evolve,
    finite_product,
    limit_value,
    partition_value,
)
from .game import (
    BoundReport,
    GameSpec,
    GameValidationError,
    SolveResult,
    exact_game_params,
    fixture,
    load_game,
    make_game,
    random_game,
    save_game,
)
from .matgame import MinimaxSolution, solve_matrix_game
from .partition import Partition, parse_partition
from .shapley import (
    apply_D,
    apply_T,
    apply_T_h,
    apply_T_tilde,
    discounted_tilde,
    discounted_value,
    discounted_value_duration,
    normalized_discounted,
    value_iterate,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CHECK_IDS",
    "CheckSpec",
    "GameSpec",
    "GameValidationError",
    "MinimaxSolution",
    "Partition",
    "SolveResult",
    "apply_D",
    "apply_T",
    "apply_T_h",
    "apply_T_tilde",
    "apply_barT_h",
    "discounted_integrated_payoff",
    "discounted_product",
    "discounted_tilde",
    "discounted_value",
    "discounted_value_duration",
    "discretized_discounted_value",
    "discretized_finite_value",
    "euler_scheme",
    "evolve",
    "exact_game_params",
    "finite_product",
    "fixture",
    "integrated_payoff",
    "limit_value",
    "load_game",
    "make_game",
    "normalized_discounted",
    "parse_partition",
    "partition_value",
    "random_game",
    "run_check",
    "run_suite",
    "save_game",
    "solve_matrix_game",
    "transition_semigroup",
    "value_iterate",
]
