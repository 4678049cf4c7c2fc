"""Closed-form optimal strategies and classification logic.

Each classifier returns a StrategyClassification: a tag naming the bang-bang
pattern, the achieved objective value, the strategy object itself and the
exit time.  Classifiers refuse (raise) rather than guess whenever a
sufficient condition cannot be verified: see the module ``errors``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import dynamics, price as price_mod, reward, utility
from .errors import (AssumptionViolated, ConditionUnverified,
                     ConfigurationError, EarlyExitPossible, Unclassified)

ROOT_XTOL = 1e-12
SCAN_CELLS = 1024
PSI_MONOTONE_POINTS = 256

BUY_ALL = "BuyAll"
SELL_ALL = "SellAll"
BUY_THEN_SELL = "BuyThenSell"
SELL_THEN_BUY = "SellThenBuy"
MULTI_SWITCH = "MultiSwitch"
HOLD_AFTER = "HoldAfter"


@dataclass
class StrategyClassification:
    """Outcome of a classifier.

    ``value`` is the achieved objective; for the stake-parity problem it is
    a cost (lower is better), recorded in diagnostics as sense='min'.
    ``switch_times`` holds the interior switch instants, empty for pure
    strategies.
    """
    tag: str
    value: float
    strategy: dynamics.Strategy
    exit_time: float
    switch_times: list = field(default_factory=list)
    first_action: str | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def t0(self):
        return self.switch_times[0] if self.switch_times else None


@dataclass
class PhaseOutcome:
    """Long-horizon fate of full-capacity buying."""
    tag: str                      # NeverMonopoly or MonopolyInFiniteTime
    limit_share: float | None = None


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _require_linear(problem):
    if problem.util is None or not problem.util.is_linear:
        raise ConfigurationError("this classifier needs linear utility")


def _check_capacity(problem):
    budget, margin = problem.capacity_margin()
    if budget > margin * (1.0 + 1e-12) + 1e-15:
        raise EarlyExitPossible(
            f"full-capacity trading could exit early: trading budget "
            f"{budget:.6g} exceeds the boundary margin {margin:.6g}")


def _price_integral(problem, a: float, b: float) -> float:
    """Integral of the discounted price curve over [a, b]."""
    if b <= a:
        return 0.0
    pm = problem.price
    if pm is None:
        return 0.0
    if pm.variant == price_mod.CONSTANT:
        return pm.p0 * (b - a)
    if pm.variant == price_mod.GBM:
        rate = problem.beta - pm.mu
        if rate == 0.0:
            return pm.p0 * (b - a)
        return pm.p0 * (np.exp(-rate * a) - np.exp(-rate * b)) / rate
    val, _ = quad(lambda s: price_mod.discounted_mean_price(pm, problem.beta, s),
                  a, b, epsabs=1e-14, epsrel=1e-11, limit=200)
    return val


def _branch_value(problem, t: float, x: float, sign: int) -> float:
    """Value of trading at sign * nu_bar from (t, x) until T, no exit."""
    sched = problem.sched
    T = problem.horizon
    spec = problem.util
    integ_tT = reward.inverse_supply_integral(sched, t, T)
    n_t = float(reward.total_supply(sched, t))
    share_T = x / n_t + sign * problem.nu_bar * integ_tT
    if share_T > 1.0 + dynamics.SHARE_SLACK or share_T < -dynamics.SHARE_SLACK:
        raise EarlyExitPossible(
            f"the characteristic from (t={t}, x={x}) leaves the admissible "
            f"band before T (share at T would be {share_T:.6g})")
    gT = dynamics.characteristic(sched, t, x, T, sign, problem.nu_bar)
    term = np.exp(-problem.beta * T) * float(spec.h_fun(gT))
    run, _ = quad(lambda s: np.exp(-problem.beta * s) * float(spec.l_fun(
        dynamics.characteristic(sched, t, x, float(s), sign, problem.nu_bar))),
        t, T, epsabs=1e-14, epsrel=1e-11, limit=200)
    return term + run - sign * problem.nu_bar * _price_integral(problem, t, T)


def value_v_plus(problem, t: float, x: float) -> float:
    """Value of buying at full capacity from (t, x) to the horizon."""
    return _branch_value(problem, t, x, +1)


def value_v_minus(problem, t: float, x: float) -> float:
    """Value of selling at full capacity from (t, x) to the horizon."""
    return _branch_value(problem, t, x, -1)


def _compose_value(problem, edges, signs) -> float:
    """Objective of the bang-bang strategy with the given legs.

    edges has one more entry than signs; leg i trades at signs[i] * nu_bar
    on [edges[i], edges[i+1]].  Telescopes through the branch values, which
    is exact because characteristics form a semigroup.
    """
    xs = problem.x
    total = 0.0
    for i, sg in enumerate(signs):
        a, b = edges[i], edges[i + 1]
        if i < len(signs) - 1:
            x_next = dynamics.characteristic(problem.sched, a, xs, b, sg,
                                             problem.nu_bar)
            total += _branch_value(problem, a, xs, sg) \
                - _branch_value(problem, b, x_next, sg)
            xs = x_next
        else:
            total += _branch_value(problem, a, xs, sg)
    return total


def _bang_bang_strategy(problem, switch_times, first_sign):
    signs = [first_sign * (-1) ** i for i in range(len(switch_times) + 1)]
    levels = [s * problem.nu_bar for s in signs]
    return dynamics.Strategy.piecewise_constant(switch_times, levels), signs


# ---------------------------------------------------------------------------
# hoarding and the monopoly phase transition
# ---------------------------------------------------------------------------

def solve_hoarding(problem) -> StrategyClassification:
    """Optimal strategy when selling earns nothing (zero discounted price).

    Buying at full capacity is then optimal.  If the horizon arrives before
    the whole supply can be bought, the answer is BuyAll.  Otherwise the
    stake hits the whole supply at the monopoly time and trading ends
    there; holding until that exit is optimal only under a verifiable
    condition on the utilities, and we refuse to classify when it fails.
    """
    if problem.price is not None:
        raise ConfigurationError(
            "solve_hoarding applies when no price model is attached "
            "(discounted price identically zero)")
    if problem.util is None:
        raise ConfigurationError("solve_hoarding needs a utility spec")
    sched = problem.sched
    T = problem.horizon
    nb = problem.nu_bar
    n0 = problem.initial_supply
    spec = problem.util

    if problem.x >= n0:
        # already the sole holder: the game ends immediately
        return StrategyClassification(
            HOLD_AFTER, float(spec.h_fun(n0)), dynamics.Strategy.constant(0.0),
            exit_time=0.0, switch_times=[],
            diagnostics={"monopoly_time": 0.0})

    budget = nb * reward.inverse_supply_integral(sched, 0.0, T)
    target = (n0 - problem.x) / n0
    if budget <= target:
        gT = dynamics.characteristic(sched, 0.0, problem.x, T, +1, nb)
        run, _ = quad(lambda s: np.exp(-problem.beta * s) * float(spec.l_fun(
            dynamics.characteristic(sched, 0.0, problem.x, float(s), +1, nb))),
            0.0, T, epsabs=1e-14, epsrel=1e-11, limit=200)
        value = run + np.exp(-problem.beta * T) * float(spec.h_fun(gT))
        return StrategyClassification(
            BUY_ALL, float(value), dynamics.Strategy.constant(nb),
            exit_time=T, diagnostics={"monopoly_time": None})

    check = utility.validate_hoarding_condition(spec, sched, problem.beta)
    if not check.holds:
        raise ConditionUnverified(
            "the post-monopoly holding condition fails at "
            f"t={check.fails_at:.6g}; optimality of hoarding is not "
            "established for these utilities", failing_time=check.fails_at)
    t0 = dynamics.monopoly_time(sched, problem.x, nb)
    run, _ = quad(lambda s: np.exp(-problem.beta * s) * float(spec.l_fun(
        dynamics.characteristic(sched, 0.0, problem.x, float(s), +1, nb))),
        0.0, t0, epsabs=1e-14, epsrel=1e-11, limit=200)
    n_t0 = float(reward.total_supply(sched, t0))
    value = run + np.exp(-problem.beta * t0) * float(spec.h_fun(n_t0))
    strat = dynamics.Strategy.piecewise_constant([t0], [nb, 0.0]) \
        if 0.0 < t0 < T else dynamics.Strategy.constant(nb)
    return StrategyClassification(
        HOLD_AFTER, float(value), strat, exit_time=t0, switch_times=[t0],
        diagnostics={"monopoly_time": t0})


def monopoly_phase(alpha: float, n0: float, x: float, nu_bar: float) -> PhaseOutcome:
    """Whether buying at full capacity ever owns the whole supply (T -> inf).

    For alpha > 1 the reward stream grows fast enough that a slow buyer
    never catches up; the threshold rate is (alpha-1) (n0-x) n0^(-1/alpha),
    inclusive.  At or below it the share converges to a limit < 1.
    """
    if alpha <= 0.0 or n0 <= 0.0:
        raise ValueError("alpha and n0 must be positive")
    if not 0.0 <= x <= n0:
        raise ValueError(f"x must lie in [0, {n0}]")
    if alpha > 1.0:
        threshold = (alpha - 1.0) * (n0 - x) * n0 ** (-1.0 / alpha)
        if nu_bar <= threshold:
            limit = nu_bar / (alpha - 1.0) * n0 ** ((1.0 - alpha) / alpha) + x / n0
            return PhaseOutcome("NeverMonopoly", limit_share=float(limit))
    return PhaseOutcome("MonopolyInFiniteTime")


# ---------------------------------------------------------------------------
# linear utility
# ---------------------------------------------------------------------------

def psi(problem, t):
    """Marginal value of holding one extra stake at time t (linear utility).

    Independent of the current stake level.  Accepts arrays.  Closed form
    for the constant-rate schedule with beta > 0, quadrature otherwise.
    """
    _require_linear(problem)
    sched = problem.sched
    T = problem.horizon
    beta = problem.beta
    lc = problem.util.l_coef
    hc = problem.util.h_coef
    t_arr = np.asarray(t, dtype=float)
    n_t = np.asarray(reward.total_supply(sched, t_arr), dtype=float)
    n_T = float(reward.total_supply(sched, T))
    if sched.kind == "polynomial" and sched.alpha == 1.0 and beta > 0.0:
        c = sched.initial_supply
        tail = ((c + t_arr) * np.exp(-beta * t_arr)
                - (c + T) * np.exp(-beta * T)) / beta \
            + (np.exp(-beta * t_arr) - np.exp(-beta * T)) / beta ** 2
    else:
        def one(tv):
            val, _ = quad(lambda s: np.exp(-beta * s)
                          * float(reward.total_supply(sched, s)),
                          tv, T, epsabs=1e-14, epsrel=1e-10, limit=200)
            return val
        tail = (np.array([one(float(tv)) for tv in t_arr])
                if t_arr.ndim else one(float(t_arr)))
    out = (hc * np.exp(-beta * T) * n_T + lc * tail) / n_t
    return float(out) if t_arr.ndim == 0 else out


def classify_linear(problem) -> StrategyClassification:
    """Optimal bang-bang strategy under linear utility.

    Constant discounted price: pure buy or sell when the price clears the
    range of psi, one interior buy-to-sell switch otherwise.  Increasing
    curves behave the same way.  Decreasing or non-monotone curves get a
    dense sign scan of psi - price with one bisection per bracket; the
    result is tagged MultiSwitch with the crossing times (possibly none).
    """
    _require_linear(problem)
    if problem.price is None:
        raise ConfigurationError(
            "classify_linear needs a price model; use solve_hoarding for "
            "the zero-price problem")
    _check_capacity(problem)
    T = problem.horizon
    mono = price_mod.monotonicity(problem.price, problem.beta)
    p0 = float(problem.discounted_price(0.0))
    psi0 = float(psi(problem, 0.0))
    psiT = float(psi(problem, T))

    if mono == "constant":
        if p0 <= psiT:
            return _pure(problem, +1, {"price_monotonicity": mono})
        if p0 >= psi0:
            return _pure(problem, -1, {"price_monotonicity": mono})
        t0 = brentq(lambda t: float(psi(problem, t)) - p0, 0.0, T, xtol=ROOT_XTOL)
        return _single_switch(problem, BUY_THEN_SELL, t0,
                              {"price_monotonicity": mono})
    if mono == "increasing":
        pT = float(problem.discounted_price(T))
        if pT <= psiT:
            return _pure(problem, +1, {"price_monotonicity": mono})
        if p0 >= psi0:
            return _pure(problem, -1, {"price_monotonicity": mono})
        t0 = brentq(lambda t: float(psi(problem, t))
                    - float(problem.discounted_price(t)), 0.0, T, xtol=ROOT_XTOL)
        return _single_switch(problem, BUY_THEN_SELL, t0,
                              {"price_monotonicity": mono})

    # decreasing or mixed: scan for crossings of psi - price
    times = _crossing_scan(problem)
    first = "sell" if p0 >= psi0 else "buy"
    first_sign = -1 if first == "sell" else +1
    strat, signs = _bang_bang_strategy(problem, times, first_sign)
    value = _compose_value(problem, [0.0] + times + [T], signs)
    return StrategyClassification(
        MULTI_SWITCH, float(value), strat, exit_time=T, switch_times=times,
        first_action=first,
        diagnostics={"price_monotonicity": mono, "crossings": len(times)})


def _pure(problem, sign, diagnostics):
    tag = BUY_ALL if sign > 0 else SELL_ALL
    value = _branch_value(problem, 0.0, problem.x, sign)
    return StrategyClassification(
        tag, float(value), dynamics.Strategy.constant(sign * problem.nu_bar),
        exit_time=problem.horizon, diagnostics=diagnostics)


def _single_switch(problem, tag, t0, diagnostics):
    T = problem.horizon
    first_sign = +1 if tag == BUY_THEN_SELL else -1
    if t0 <= 0.0:
        return _pure(problem, -first_sign, diagnostics)
    if t0 >= T:
        return _pure(problem, first_sign, diagnostics)
    strat, signs = _bang_bang_strategy(problem, [t0], first_sign)
    value = _compose_value(problem, [0.0, t0, T], signs)
    return StrategyClassification(
        tag, float(value), strat, exit_time=T, switch_times=[t0],
        first_action="buy" if first_sign > 0 else "sell",
        diagnostics=diagnostics)


def _crossing_scan(problem, cells: int = SCAN_CELLS):
    """Sign changes of psi - price on a dense grid, refined by bisection.

    Exact zeros at nodes count as the buy side, matching the non-strict
    buy convention.  Double roots inside one cell can be missed; the cell
    count is configurable for that reason.
    """
    T = problem.horizon
    ts = np.linspace(0.0, T, cells + 1)
    d = np.asarray(psi(problem, ts), dtype=float) \
        - np.asarray(problem.discounted_price(ts), dtype=float)
    sgn = np.where(d >= 0.0, 1, -1)
    times = []
    f = lambda t: float(psi(problem, t)) - float(problem.discounted_price(t))
    for i in range(cells):
        if sgn[i] != sgn[i + 1]:
            times.append(float(brentq(f, ts[i], ts[i + 1], xtol=ROOT_XTOL)))
    return times


# ---------------------------------------------------------------------------
# GBM price, polynomial schedule
# ---------------------------------------------------------------------------

def classify_gbm_polynomial(problem, eps: float | None = None) -> StrategyClassification:
    """Classification for a GBM price with beta > mu (decreasing curve).

    Two explicit bounds on P(0) decide whether psi - price is monotone over
    the horizon; the bounds come from a large-supply asymptotic, so finite
    supplies make them sufficient-only and the output carries a heuristic
    flag.  When neither bound holds, falls back to the dense crossing scan
    and tags the result MultiSwitch.
    """
    _require_linear(problem)
    if problem.sched.kind != "polynomial":
        raise ConfigurationError("this classifier needs a polynomial schedule")
    pm = problem.price
    if pm is None or pm.variant != price_mod.GBM:
        raise ConfigurationError("this classifier needs a GBM price model")
    if problem.beta <= pm.mu:
        raise ConfigurationError(
            f"needs beta > mu, got beta={problem.beta}, mu={pm.mu}")
    _check_capacity(problem)

    sched = problem.sched
    T = problem.horizon
    beta, mu = problem.beta, pm.mu
    alpha = sched.alpha
    n0 = sched.initial_supply
    root = n0 ** (1.0 / alpha)
    lc, hc = problem.util.l_coef, problem.util.h_coef
    if eps is None:
        eps = 1e-6 * root
    lower_inc = (alpha * hc * np.exp(-mu * T) * (root + T) ** alpha
                 / n0 ** (1.0 + 1.0 / alpha)
                 + alpha * lc / (beta * root) + lc) / (beta - mu) + eps / root
    upper_dec = (alpha * hc * np.exp(-beta * T) / (root + T)
                 + lc * np.exp(-mu * T)) / (beta - mu) - eps / root

    p0 = pm.p0
    psi0 = float(psi(problem, 0.0))
    cross_level = np.exp((beta - mu) * T) * float(psi(problem, T))
    diag = {"lower_increasing_bound": float(lower_inc),
            "upper_decreasing_bound": float(upper_dec),
            "sell_threshold": float(cross_level),
            "psi_at_0": psi0,
            "heuristic": True,
            "difference_monotonicity": None}

    def crossing_time():
        return brentq(lambda t: float(psi(problem, t))
                      - float(problem.discounted_price(t)), 0.0, T,
                      xtol=ROOT_XTOL)

    if p0 > lower_inc:
        diag["difference_monotonicity"] = "increasing"
        if p0 >= cross_level:
            return _pure(problem, -1, diag)
        if p0 >= psi0:
            return _single_switch(problem, SELL_THEN_BUY, crossing_time(), diag)
        return _pure(problem, +1, diag)
    if p0 < upper_dec:
        diag["difference_monotonicity"] = "decreasing"
        if p0 >= psi0:
            return _pure(problem, -1, diag)
        if p0 >= cross_level:
            return _single_switch(problem, BUY_THEN_SELL, crossing_time(), diag)
        return _pure(problem, +1, diag)

    times = _crossing_scan(problem)
    first = "sell" if p0 >= psi0 else "buy"
    first_sign = -1 if first == "sell" else +1
    strat, signs = _bang_bang_strategy(problem, times, first_sign)
    value = _compose_value(problem, [0.0] + times + [T], signs)
    diag["crossings"] = len(times)
    return StrategyClassification(
        MULTI_SWITCH, float(value), strat, exit_time=T, switch_times=times,
        first_action=first, diagnostics=diag)


# ---------------------------------------------------------------------------
# convex utility
# ---------------------------------------------------------------------------

_WHICH = ("++", "--", "-+", "+-")


def psi_two_phase(problem, t: float, which: str):
    """Marginal stake value along a two-phase characteristic.

    ``which`` follows the same convention as the characteristics: first
    character after the switch at t, second before it.  For linear utility
    all four collapse to psi.  Accepts an array of t values.
    """
    if which not in _WHICH:
        raise ValueError(f"which must be one of {_WHICH}, got {which!r}")
    if problem.util is None or not problem.util.is_convex:
        raise ConfigurationError("psi_two_phase needs convex (or linear) utility")
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim:
        return np.array([psi_two_phase(problem, float(tv), which) for tv in t_arr])
    t = float(t_arr)
    sched = problem.sched
    T = problem.horizon
    beta = problem.beta
    nb = problem.nu_bar
    spec = problem.util
    x = problem.x

    share_t = (x / problem.initial_supply
               + (1.0 if which[1] == "+" else -1.0) * nb
               * reward.inverse_supply_integral(sched, 0.0, t))
    share_T = share_t + (1.0 if which[0] == "+" else -1.0) * nb \
        * reward.inverse_supply_integral(sched, t, T)
    for sh, where in ((share_t, "the switch"), (share_T, "the horizon")):
        if sh > 1.0 + dynamics.SHARE_SLACK or sh < -dynamics.SHARE_SLACK:
            raise EarlyExitPossible(
                f"the two-phase characteristic leaves the admissible band "
                f"by {where} (share {sh:.6g})")

    gT = dynamics.two_phase_characteristic(sched, x, t, T, which, nb)
    n_t = float(reward.total_supply(sched, t))
    n_T = float(reward.total_supply(sched, T))
    term = np.exp(-beta * T) * n_T * float(spec.h_prime(gT))
    run, _ = quad(lambda s: np.exp(-beta * s)
                  * float(reward.total_supply(sched, s))
                  * float(spec.l_prime(dynamics.two_phase_characteristic(
                      sched, x, t, float(s), which, nb))),
                  t, T, epsabs=1e-14, epsrel=1e-9, limit=200)
    return float((term + run) / n_t)


def classify_convex(problem) -> StrategyClassification:
    """Optimal strategy under convex utility and a constant discounted price.

    The decision thresholds are the buy-then-sell marginal value at the
    horizon (A), the pure-sell marginal value now (B) and the pure-buy
    marginal value at the horizon (C).  The case ladder needs the
    buy-then-sell marginal value curve to be decreasing, which is verified
    on a dense grid and refused otherwise.  Prices falling in no proven
    window return Unclassified with the thresholds attached.
    """
    if problem.util is None or not problem.util.is_convex:
        raise ConfigurationError("classify_convex needs convex (or linear) utility")
    if problem.price is None:
        raise ConfigurationError("classify_convex needs a price model")
    if price_mod.monotonicity(problem.price, problem.beta) != "constant":
        raise ConfigurationError(
            "classify_convex covers constant discounted prices only")
    _check_capacity(problem)
    T = problem.horizon
    p0 = float(problem.discounted_price(0.0))

    grid = np.linspace(0.0, T, PSI_MONOTONE_POINTS)
    curve = psi_two_phase(problem, grid, "-+")
    scale = max(1.0, float(np.abs(curve).max()))
    if np.any(np.diff(curve) > 1e-12 * scale):
        bad = int(np.argmax(np.diff(curve) > 1e-12 * scale))
        raise AssumptionViolated(
            "the buy-then-sell marginal value curve is not decreasing "
            f"(first increase near t={grid[bad]:.6g}); the case ladder "
            "does not apply")

    thr_a = float(curve[-1])                              # at the horizon
    thr_b = float(curve[0])                               # pure sell, now
    thr_c = psi_two_phase(problem, T, "++")               # pure buy, horizon
    diag = {"buy_all_threshold": thr_a, "sell_all_threshold": thr_b,
            "pure_buy_horizon_threshold": thr_c, "price": p0}

    def switch_time():
        return float(brentq(lambda t: psi_two_phase(problem, float(t), "-+") - p0,
                            0.0, T, xtol=ROOT_XTOL))

    if p0 >= max(thr_c, thr_b):
        return _pure(problem, -1, diag)
    if p0 <= thr_a:
        return _pure(problem, +1, diag)
    if thr_c < thr_b and thr_a < p0 < thr_b:
        return _single_switch(problem, BUY_THEN_SELL, switch_time(), diag)
    if thr_b < thr_c:
        if thr_b < p0 < thr_c:
            return _pure(problem, -1, diag)
        if thr_a < p0 <= thr_b:
            return _single_switch(problem, BUY_THEN_SELL, switch_time(), diag)
    raise Unclassified(
        f"price {p0:.6g} falls in no proven window", diagnostics=diag)


# ---------------------------------------------------------------------------
# stake parity
# ---------------------------------------------------------------------------

def solve_stake_parity(problem) -> StrategyClassification:
    """Minimal-cost tracking of the average holding N(t)/K.

    Returns the cheapest strategy and its cost (sense: minimize).  Far
    starts sell or buy for the whole horizon; nearer starts trade at full
    capacity exactly until the share hits 1/K and hold thereafter, since
    zero trading preserves the share.
    """
    pen = problem.penalty
    if pen is None:
        raise ConfigurationError("solve_stake_parity needs a penalty spec")
    if problem.util is not None or problem.price is not None:
        raise ConfigurationError(
            "the parity problem has no utility or price terms")
    sched = problem.sched
    T = problem.horizon
    nb = problem.nu_bar
    n0 = problem.initial_supply
    K = pen.K
    delta = pen.delta
    x = problem.x
    i_total = reward.inverse_supply_integral(sched, 0.0, T)
    diag = {"sense": "min"}

    def deviation_cost(sign, t_end):
        # running penalty while trading toward parity on [0, t_end]
        f = lambda s: np.exp(-delta * s) * float(pen.g_fun(
            dynamics.characteristic(sched, 0.0, x, float(s), sign, nb)
            - reward.total_supply(sched, float(s)) / K))
        val, _ = quad(f, 0.0, t_end, epsabs=1e-14, epsrel=1e-11, limit=200)
        return val

    hold_g = float(pen.g_fun(0.0))
    hold_q = float(pen.q_fun(0.0))

    if x > n0 * (1.0 / K + nb * i_total):
        gT = dynamics.characteristic(sched, 0.0, x, T, -1, nb)
        cost = deviation_cost(-1, T) + np.exp(-delta * T) * float(pen.q_fun(
            gT - reward.total_supply(sched, T) / K))
        return StrategyClassification(
            SELL_ALL, float(cost), dynamics.Strategy.constant(-nb),
            exit_time=T, diagnostics=diag)
    if x < n0 * (1.0 / K - nb * i_total):
        gT = dynamics.characteristic(sched, 0.0, x, T, +1, nb)
        cost = deviation_cost(+1, T) + np.exp(-delta * T) * float(pen.q_fun(
            gT - reward.total_supply(sched, T) / K))
        return StrategyClassification(
            BUY_ALL, float(cost), dynamics.Strategy.constant(nb),
            exit_time=T, diagnostics=diag)

    if x == n0 / K:
        cost = hold_g * (1.0 - np.exp(-delta * T)) / delta \
            + np.exp(-delta * T) * hold_q
        return StrategyClassification(
            HOLD_AFTER, float(cost), dynamics.Strategy.constant(0.0),
            exit_time=T, switch_times=[], first_action=None,
            diagnostics=dict(diag, hold_from=0.0))

    sign = -1 if x > n0 / K else +1
    gap = abs(x / n0 - 1.0 / K)
    t_hit = reward.invert_supply_integral(sched, gap / nb)
    cost = deviation_cost(sign, t_hit) \
        + hold_g * (np.exp(-delta * t_hit) - np.exp(-delta * T)) / delta \
        + np.exp(-delta * T) * hold_q
    if 0.0 < t_hit < T:
        strat = dynamics.Strategy.piecewise_constant([t_hit], [sign * nb, 0.0])
        switches = [t_hit]
    else:
        strat = dynamics.Strategy.constant(sign * nb)
        switches = []
    return StrategyClassification(
        HOLD_AFTER, float(cost), strat, exit_time=T, switch_times=switches,
        first_action="sell" if sign < 0 else "buy",
        diagnostics=dict(diag, hold_from=float(t_hit)))
