"""Linear utility classification against independently computed values.

Base scenario: N(t) = 100 + t on [0, 10], running utility 0.01 x, terminal
utility x, beta = 0.1, nu_bar = 1, x = 50.  The marginal-value curve runs
from psi(0) = 0.470522 down to psi(10) = e^{-1}.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from stakeopt import objective, reward, strategies
from stakeopt.errors import ConfigurationError, EarlyExitPossible
from stakeopt.price import PriceModel
from stakeopt.problem import TradingProblem
from stakeopt.utility import UtilitySpec

PSI_0 = 0.47052185234801347
PSI_T = 0.36787944117144233
T0_BTS = 4.012387597751201          # root of psi(t) = 0.42
U_BUY_ALL = 24.655073100446547      # constant price 0.3
U_BTS = 23.789194275450676          # constant price 0.42
U_SELL_ALL = 25.397112134326267     # constant price 0.6


def make_problem(price_model, beta=0.1, x=50.0, nu_bar=1.0, horizon=10.0):
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, horizon)
    return TradingProblem(sched=sched, util=UtilitySpec.linear(0.01, 1.0),
                          price=price_model, beta=beta, nu_bar=nu_bar, x=x)


def test_psi_endpoints():
    prob = make_problem(PriceModel.constant(0.42))
    assert strategies.psi(prob, 0.0) == pytest.approx(PSI_0, abs=1e-12)
    # at the horizon only the terminal utility is left
    assert strategies.psi(prob, 10.0) == math.exp(-1.0)


def test_psi_closed_form_matches_quadrature():
    # the alpha=1 closed form against the generic quadrature branch, which
    # a tabulated schedule forces
    prob = make_problem(PriceModel.constant(0.42))
    knots = [(float(t), 100.0 + float(t)) for t in range(11)]
    sched_tab = reward.RewardSchedule.tabulated(knots)
    prob_tab = TradingProblem(sched=sched_tab,
                              util=UtilitySpec.linear(0.01, 1.0),
                              price=PriceModel.constant(0.42),
                              beta=0.1, nu_bar=1.0, x=50.0)
    for t in (0.0, 3.3, 8.0):
        assert strategies.psi(prob_tab, t) == \
            pytest.approx(strategies.psi(prob, t), rel=1e-7)


def test_psi_is_decreasing_and_vectorized():
    prob = make_problem(PriceModel.constant(0.42))
    ts = np.linspace(0.0, 10.0, 257)
    vals = strategies.psi(prob, ts)
    assert vals.shape == ts.shape
    assert np.all(np.diff(vals) < 0.0)


def test_classify_buy_all():
    res = strategies.classify_linear(make_problem(PriceModel.constant(0.3)))
    assert res.tag == "BuyAll"
    assert res.value == pytest.approx(U_BUY_ALL, abs=1e-9)
    assert res.switch_times == []
    assert res.exit_time == 10.0
    assert res.strategy.levels == [1.0]


def test_classify_sell_all():
    res = strategies.classify_linear(make_problem(PriceModel.constant(0.6)))
    assert res.tag == "SellAll"
    assert res.value == pytest.approx(U_SELL_ALL, abs=1e-9)
    assert res.strategy.levels == [-1.0]


def test_classify_buy_then_sell():
    res = strategies.classify_linear(make_problem(PriceModel.constant(0.42)))
    assert res.tag == "BuyThenSell"
    assert res.t0 == pytest.approx(T0_BTS, abs=1e-9)
    assert res.value == pytest.approx(U_BTS, abs=1e-9)
    assert res.first_action == "buy"
    assert res.strategy.levels == [1.0, -1.0]
    # psi at the switch equals the price
    assert strategies.psi(make_problem(PriceModel.constant(0.42)), res.t0) == \
        pytest.approx(0.42, abs=1e-11)


def test_boundary_ties_prefer_buying():
    # price exactly at psi(T): buying weakly dominates, tag stays BuyAll
    res = strategies.classify_linear(make_problem(PriceModel.constant(PSI_T)))
    assert res.tag == "BuyAll"
    res2 = strategies.classify_linear(
        make_problem(PriceModel.constant(PSI_0 + 1e-15)))
    assert res2.tag == "SellAll"


def test_value_exceeds_both_pure_alternatives():
    prob = make_problem(PriceModel.constant(0.42))
    res = strategies.classify_linear(prob)
    assert res.value >= strategies.value_v_plus(prob, 0.0, 50.0)
    assert res.value >= strategies.value_v_minus(prob, 0.0, 50.0)


def test_classified_value_matches_independent_evaluation():
    prob = make_problem(PriceModel.constant(0.42))
    res = strategies.classify_linear(prob)
    sim = objective.evaluate_j2(prob, res.strategy, step=1e-3)
    assert sim == pytest.approx(res.value, rel=1e-9)


def test_increasing_curve_single_switch():
    # GBM with mu > beta gives an increasing discounted curve; classify_linear
    # handles it through the same one-switch ladder
    pm = PriceModel.gbm(0.40, 0.08, 0.2)
    prob = make_problem(pm, beta=0.05)
    res = strategies.classify_linear(prob)
    assert res.diagnostics["price_monotonicity"] == "increasing"
    assert res.tag in ("BuyAll", "SellAll", "BuyThenSell")


def test_decreasing_curve_goes_through_the_scan():
    pm = PriceModel.tabulated_discounted(
        [(0.0, 0.47), (5.0, 0.40), (10.0, 0.38)], beta=0.1)
    prob = make_problem(pm)
    res = strategies.classify_linear(prob)
    assert res.tag == "MultiSwitch"
    assert res.first_action in ("buy", "sell")
    assert res.diagnostics["crossings"] == len(res.switch_times)
    # crossings are genuine roots of psi - price
    for t in res.switch_times:
        gap = strategies.psi(prob, t) - prob.discounted_price(t)
        assert abs(gap) < 1e-9


def test_capacity_violation_refuses():
    with pytest.raises(EarlyExitPossible):
        strategies.classify_linear(
            make_problem(PriceModel.constant(0.42), nu_bar=6.0))


def test_requires_linear_utility_and_price():
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, 10.0)
    convex = TradingProblem(sched=sched, util=UtilitySpec.power(2.0, 1e-4, 1e-3),
                            price=PriceModel.constant(0.42), beta=0.1,
                            nu_bar=1.0, x=50.0)
    with pytest.raises(ConfigurationError):
        strategies.classify_linear(convex)
    no_price = TradingProblem(sched=sched, util=UtilitySpec.linear(0.01, 1.0),
                              beta=0.1, nu_bar=1.0, x=50.0)
    with pytest.raises(ConfigurationError):
        strategies.classify_linear(no_price)


def test_branch_value_against_direct_quadrature():
    prob = make_problem(PriceModel.constant(0.42))
    sched = prob.sched
    from stakeopt import dynamics
    run, _ = quad(lambda s: math.exp(-0.1 * s) * 0.01
                  * dynamics.characteristic(sched, 2.0, 60.0, float(s), -1, 1.0),
                  2.0, 10.0, epsabs=1e-13, epsrel=1e-11)
    g_T = dynamics.characteristic(sched, 2.0, 60.0, 10.0, -1, 1.0)
    want = math.exp(-1.0) * g_T + run + 0.42 * 8.0
    assert strategies.value_v_minus(prob, 2.0, 60.0) == \
        pytest.approx(want, rel=1e-10)
