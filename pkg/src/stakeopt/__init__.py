"""Optimal stake trading under growing-supply reward schedules.

Closed-form bang-bang classification, a finite-difference dynamic
programming solver and independent objective evaluation (quadrature,
Monte Carlo, brute-force search), plus a scenario-driven CLI.
"""

from .dynamics import (StateTrajectory, Strategy, characteristic,
                       monopoly_time, simulate, two_phase_characteristic)
from .errors import (AssumptionViolated, ConditionUnverified,
                     ConfigurationError, EarlyExitPossible, NumericsError,
                     StakeoptError, Unclassified)
from .hjb import ValueGrid, extract_feedback, solve, value_at
from .objective import (ObjectiveReport, brute_force_best, evaluate_j2,
                        evaluate_full_monte_carlo, evaluate_parity_cost)
from .price import PriceModel, discounted_mean_price, lipschitz_estimate, \
    monotonicity, sample_price_path
from .problem import TradingProblem
from .reward import (RewardSchedule, inverse_supply_integral,
                     invert_supply_integral, reward_rate, total_supply)
from .strategies import (PhaseOutcome, StrategyClassification,
                         classify_convex, classify_gbm_polynomial,
                         classify_linear, monopoly_phase, psi, psi_two_phase,
                         solve_hoarding, solve_stake_parity, value_v_minus,
                         value_v_plus)
from .utility import (PenaltySpec, UtilitySpec, eval_penalty, eval_utility,
                      eval_utility_derivative, validate_hoarding_condition)

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolated", "ConditionUnverified", "ConfigurationError",
    "EarlyExitPossible", "NumericsError", "ObjectiveReport", "PenaltySpec",
    "PhaseOutcome", "PriceModel", "RewardSchedule", "StakeoptError",
    "StateTrajectory", "Strategy", "StrategyClassification",
    "TradingProblem", "Unclassified", "UtilitySpec", "ValueGrid",
    "brute_force_best", "characteristic", "classify_convex",
    "classify_gbm_polynomial", "classify_linear", "discounted_mean_price",
    "eval_penalty", "eval_utility", "eval_utility_derivative",
    "evaluate_full_monte_carlo", "evaluate_j2", "evaluate_parity_cost",
    "extract_feedback", "inverse_supply_integral", "invert_supply_integral",
    "lipschitz_estimate", "monopoly_phase", "monopoly_time", "monotonicity",
    "psi", "psi_two_phase", "reward_rate", "sample_price_path", "simulate",
    "solve", "solve_hoarding", "solve_stake_parity", "total_supply",
    "two_phase_characteristic", "value_at", "value_v_minus", "value_v_plus",
    "validate_hoarding_condition",
]
