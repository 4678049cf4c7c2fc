"""Strategy scoring: quadrature, Monte Carlo sampling, brute-force search."""

import itertools

import numpy as np
import pytest

from stakeopt import dynamics, objective, reward
from stakeopt.errors import ConfigurationError
from stakeopt.price import PriceModel
from stakeopt.problem import TradingProblem
from stakeopt.utility import PenaltySpec, UtilitySpec

T0_BTS = 4.012387597751201
U_BTS = 23.789194275450676
EPS_DISC_M8 = 0.06515069853569706      # nu_bar * max|psi - p| * (T/8)

T0_STB = 6.661884368949178
U_STB = 23.842000787023917

T_HIT = 10.517091807564762
U_PAR = 281.1056248875373

J1_RAMP = -2.6424111765711533          # b(t) = t
J1_PARAB = -2.0727664702865396         # b(t) = 0.2 t (10 - t)


def lin_problem(price=None, nu_bar=1.0, x=50.0, horizon=10.0, util="linear"):
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, horizon)
    spec = UtilitySpec.linear(0.01, 1.0) if util == "linear" else None
    return TradingProblem(sched=sched, util=spec, price=price, beta=0.1,
                          nu_bar=nu_bar, x=x)


def gbm_problem(p0=0.55):
    return lin_problem(price=PriceModel.gbm(p0, 0.05, 0.2))


def parity_problem(x=60.0):
    sched = reward.RewardSchedule.polynomial(1.0, 100.0, 20.0)
    return TradingProblem(sched=sched, beta=0.0, nu_bar=1.0, x=x,
                          penalty=PenaltySpec.quadratic(1.0, 1.0, 0.1, 2))


def test_j2_matches_the_closed_form_switch_value():
    prob = lin_problem(price=PriceModel.constant(0.42))
    strat = dynamics.Strategy.piecewise_constant([T0_BTS], [1.0, -1.0])
    assert objective.evaluate_j2(prob, strat) == pytest.approx(U_BTS, rel=1e-8)


def test_j2_price_term_only():
    # without utility the objective reduces to the trading cash flow
    prob = lin_problem(price=PriceModel.constant(0.42), util=None)
    got = objective.evaluate_j2(prob, dynamics.Strategy.constant(1.0))
    assert got == pytest.approx(-4.2, rel=1e-12)


def test_j2_feedback_strategy():
    prob = lin_problem(price=PriceModel.constant(0.42))
    const = objective.evaluate_j2(prob, dynamics.Strategy.constant(1.0))
    fb = objective.evaluate_j2(prob, dynamics.Strategy.feedback(
        lambda t, x: 1.0))
    assert fb == pytest.approx(const, rel=1e-9)


def test_parity_cost_matches_the_solver():
    prob = parity_problem()
    strat = dynamics.Strategy.piecewise_constant([T_HIT], [-1.0, 0.0])
    got = objective.evaluate_parity_cost(prob, strat)
    assert got == pytest.approx(U_PAR, abs=1e-7)
    with pytest.raises(ConfigurationError, match="penalty"):
        objective.evaluate_parity_cost(lin_problem(), strat)


def test_bank_account_contribution():
    prob = gbm_problem()
    strat = dynamics.Strategy.constant(1.0)
    ramp = objective.evaluate_full_monte_carlo(
        prob, strat, bank_policy=lambda t: t, n_paths=2)
    assert ramp.j1 == pytest.approx(J1_RAMP, rel=1e-10)
    parab = objective.evaluate_full_monte_carlo(
        prob, strat, bank_policy=lambda t: 0.2 * t * (10.0 - t), n_paths=2)
    assert parab.j1 == pytest.approx(J1_PARAB, rel=1e-10)


def test_monte_carlo_agrees_with_the_decomposition():
    prob = gbm_problem()
    strat = dynamics.Strategy.piecewise_constant([T0_STB], [-1.0, 1.0])
    rep = objective.evaluate_full_monte_carlo(
        prob, strat, bank_policy=lambda t: t, n_paths=10_000, seed=11)
    assert rep.j2 == pytest.approx(U_STB, rel=1e-7)
    assert rep.n_paths == 10_000
    assert rep.exit_kind == dynamics.HORIZON
    assert rep.exit_time == 10.0
    want = rep.j1 + rep.j2
    assert abs(rep.mc_mean - want) <= rep.mc_halfwidth
    assert rep.decomposition_gap == abs(rep.mc_mean - want)


def test_monte_carlo_is_deterministic_per_seed():
    prob = gbm_problem()
    strat = dynamics.Strategy.constant(-1.0)
    a = objective.evaluate_full_monte_carlo(prob, strat, n_paths=3000, seed=7)
    b = objective.evaluate_full_monte_carlo(prob, strat, n_paths=3000, seed=7)
    assert a.mc_mean == b.mc_mean
    assert a.mc_halfwidth == b.mc_halfwidth
    c = objective.evaluate_full_monte_carlo(prob, strat, n_paths=3000, seed=8)
    assert c.mc_mean != a.mc_mean


def test_monte_carlo_guards():
    strat = dynamics.Strategy.constant(1.0)
    with pytest.raises(ConfigurationError, match="GBM"):
        objective.evaluate_full_monte_carlo(
            lin_problem(price=PriceModel.constant(0.42)), strat)
    prob = gbm_problem()
    with pytest.raises(ConfigurationError, match="at least 2"):
        objective.evaluate_full_monte_carlo(prob, strat, n_paths=1)
    with pytest.raises(ConfigurationError, match="start at 0"):
        objective.evaluate_full_monte_carlo(
            prob, strat, bank_policy=lambda t: 1.0 + t, n_paths=2)
    with pytest.raises(ConfigurationError, match="nonnegative"):
        objective.evaluate_full_monte_carlo(
            prob, strat, bank_policy=lambda t: -t, n_paths=2)


def test_brute_force_single_cell_picks_the_best_constant():
    prob = lin_problem(price=PriceModel.constant(0.42))
    strat, value = objective.brute_force_best(prob, 1, 3)
    by_hand = max(objective.evaluate_j2(prob, dynamics.Strategy.constant(v))
                  for v in (-1.0, 0.0, 1.0))
    # one 10-wide cell leaves the 17-node Simpson rule ~4e-7 of quadrature
    # error against the fine simulation grid
    assert value == pytest.approx(by_hand, abs=2e-6)


def test_brute_force_converges_to_the_switch_solution():
    prob = lin_problem(price=PriceModel.constant(0.42))
    strat, value = objective.brute_force_best(prob, 8, 3)
    assert value <= U_BTS + 1e-9
    assert value >= U_BTS - EPS_DISC_M8
    # buy first, sell later, with the sign change next to t0 = 4.01
    levels = strat.levels
    flips = [j for j in range(1, 8) if levels[j] != levels[j - 1]]
    assert len(flips) == 1
    assert levels[0] == 1.0 and levels[-1] == -1.0
    assert flips[0] in (3, 4)          # edges at 3.75 or 5.0


def test_brute_force_parity_minimizes():
    prob = parity_problem()
    strat, value = objective.brute_force_best(prob, 2, 3)
    best = min(objective.evaluate_parity_cost(
        prob, dynamics.Strategy.piecewise_constant([10.0], list(pat)))
        for pat in itertools.product((-1.0, 0.0, 1.0), repeat=2))
    assert value == pytest.approx(best, rel=1e-5)


def test_brute_force_handles_exiting_patterns():
    # from x = 99 with nu_bar = 2 the buy-heavy patterns reach the whole
    # supply before the horizon and are scored by simulation instead
    prob = lin_problem(nu_bar=2.0, x=99.0)
    strat, value = objective.brute_force_best(prob, 2, 3)
    best = max(objective.evaluate_j2(
        prob, dynamics.Strategy.piecewise_constant([5.0], list(pat)))
        for pat in itertools.product((-2.0, 0.0, 2.0), repeat=2))
    assert np.isfinite(value)
    assert value == pytest.approx(best, rel=1e-6)


def test_brute_force_caps():
    prob = lin_problem(price=PriceModel.constant(0.42))
    with pytest.raises(ConfigurationError, match="m_intervals"):
        objective.brute_force_best(prob, 11, 3)
    with pytest.raises(ConfigurationError, match="at least 2 levels"):
        objective.brute_force_best(prob, 3, 1)
    with pytest.raises(ConfigurationError, match="exceed"):
        objective.brute_force_best(prob, 9, 4)
    bare = lin_problem(price=PriceModel.constant(0.42), util=None)
    with pytest.raises(ConfigurationError, match="utility"):
        objective.brute_force_best(bare, 2, 3)
