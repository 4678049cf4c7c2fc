"""Zero-price hoarding: buy-to-horizon, buy-to-monopoly, and the phase line.

Expected values were computed independently with adaptive quadrature on the
closed-form characteristics (DOP853 cross-checked to 1e-13).
"""

import math

import pytest

from stakeopt import dynamics, reward, strategies
from stakeopt.errors import ConditionUnverified, ConfigurationError
from stakeopt.price import PriceModel
from stakeopt.problem import TradingProblem
from stakeopt.utility import UtilitySpec

LIN = UtilitySpec.linear(0.01, 1.0)

# alpha=2, N0=100, T=10, nu=2, x=50, beta=0.1: budget 0.1 < target 0.5
U_BUY_ALL = 95.74678164617384
# alpha=1, N0=100, T=10, nu=2, x=99, beta=0.1: monopoly at 100(e^0.005 - 1)
T0_MONOPOLY = 0.5012520859401064
U_HOLD_AFTER = 96.07542384402029


def test_case_buy_to_horizon():
    sched = reward.RewardSchedule.polynomial(2.0, 100.0, 10.0)
    prob = TradingProblem(sched=sched, util=LIN, beta=0.1, nu_bar=2.0, x=50.0)
    res = strategies.solve_hoarding(prob)
    assert res.tag == "BuyAll"
    assert res.value == pytest.approx(U_BUY_ALL, abs=1e-9)
    assert res.exit_time == 10.0
    assert res.switch_times == []
    assert res.diagnostics["monopoly_time"] is None
    assert res.strategy.levels == [2.0]


def test_case_buy_to_monopoly():
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, 10.0)
    prob = TradingProblem(sched=sched, util=LIN, beta=0.1, nu_bar=2.0, x=99.0)
    res = strategies.solve_hoarding(prob)
    assert res.tag == "HoldAfter"
    assert res.exit_time == pytest.approx(T0_MONOPOLY, abs=1e-12)
    assert res.value == pytest.approx(U_HOLD_AFTER, abs=1e-9)
    assert res.t0 == res.exit_time
    # buy at capacity to the monopoly time, hold afterwards
    assert res.strategy.levels == [2.0, 0.0]
    assert res.strategy.switch_times == [res.exit_time]


def test_monopoly_value_is_terminal_utility_at_exit():
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, 10.0)
    prob = TradingProblem(sched=sched, util=LIN, beta=0.1, nu_bar=2.0, x=99.0)
    res = strategies.solve_hoarding(prob)
    t0 = res.exit_time
    n_t0 = reward.total_supply(sched, t0)
    term = math.exp(-0.1 * t0) * n_t0
    assert res.value > term          # running utility adds a little on [0, t0]
    assert res.value < term + 0.01 * n_t0 * t0     # running part envelope


def test_already_sole_holder():
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, 10.0)
    prob = TradingProblem(sched=sched, util=LIN, beta=0.1, nu_bar=1.0, x=100.0)
    res = strategies.solve_hoarding(prob)
    assert res.tag == "HoldAfter"
    assert res.exit_time == 0.0
    # exogenous exit at t=0: the value is the undiscounted terminal utility
    assert res.value == 100.0


def test_condition_failure_is_a_refusal():
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, 10.0)
    prob = TradingProblem(sched=sched, util=LIN, beta=0.001, nu_bar=2.0, x=99.0)
    with pytest.raises(ConditionUnverified) as info:
        strategies.solve_hoarding(prob)
    assert info.value.failing_time == 0.0


def test_hoarding_rejects_price_models():
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, 10.0)
    prob = TradingProblem(sched=sched, util=LIN, price=PriceModel.constant(0.4),
                          beta=0.1, nu_bar=1.0, x=50.0)
    with pytest.raises(ConfigurationError):
        strategies.solve_hoarding(prob)
    bare = TradingProblem(sched=sched, beta=0.1, nu_bar=1.0, x=50.0)
    with pytest.raises(ConfigurationError):
        strategies.solve_hoarding(bare)


def test_buy_all_value_matches_simulation():
    sched = reward.RewardSchedule.polynomial(2.0, 100.0, 10.0)
    prob = TradingProblem(sched=sched, util=LIN, beta=0.1, nu_bar=2.0, x=50.0)
    res = strategies.solve_hoarding(prob)
    from stakeopt import objective
    sim_value = objective.evaluate_j2(prob, res.strategy, step=1e-3)
    assert sim_value == pytest.approx(res.value, rel=1e-9)


# --- the monopoly phase transition ---------------------------------------

def test_phase_below_threshold():
    out = strategies.monopoly_phase(2.0, 100.0, 50.0, 2.0)
    assert out.tag == "NeverMonopoly"
    assert out.limit_share == pytest.approx(0.7, abs=1e-15)


def test_phase_at_threshold_is_inclusive():
    # threshold rate is (alpha-1)(N-x) N^(-1/alpha) = 5
    out = strategies.monopoly_phase(2.0, 100.0, 50.0, 5.0)
    assert out.tag == "NeverMonopoly"
    assert out.limit_share == pytest.approx(1.0, abs=1e-12)


def test_phase_above_threshold():
    assert strategies.monopoly_phase(2.0, 100.0, 50.0, 6.0).tag == \
        "MonopolyInFiniteTime"
    # alpha <= 1 always reaches the monopoly eventually
    assert strategies.monopoly_phase(1.0, 100.0, 50.0, 0.01).tag == \
        "MonopolyInFiniteTime"


def test_phase_limit_matches_long_simulation():
    sched = reward.RewardSchedule.polynomial(2.0, 100.0, 1e4)
    prob = TradingProblem(sched=sched, beta=0.0, nu_bar=2.0, x=50.0)
    traj = dynamics.simulate(prob, dynamics.Strategy.constant(2.0), step=1.0)
    assert traj.exit_kind == dynamics.HORIZON
    assert traj.shares[-1] == pytest.approx(0.7, abs=1e-3)
