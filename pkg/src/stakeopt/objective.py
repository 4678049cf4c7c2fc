"""Independent objective evaluation: quadrature, Monte Carlo, brute force.

Everything here scores a strategy without assuming anything about where it
came from, which is what makes it usable as an optimality oracle against
the closed-form classifiers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, simpson

from . import dynamics, price as price_mod, reward
from .errors import ConfigurationError

BRUTE_FORCE_MAX_INTERVALS = 10
BRUTE_FORCE_MAX_PATTERNS = 60_000
_CELL_NODES = 17            # per-cell composite Simpson nodes, odd
MC_CHUNK = 10_000
MC_GRID_CELLS = 512


@dataclass
class ObjectiveReport:
    """Evaluation summary; Monte Carlo fields stay None unless sampled."""
    j2: float
    j1: float = 0.0
    mc_mean: float | None = None
    mc_halfwidth: float | None = None
    exit_time: float = 0.0
    exit_kind: str = dynamics.HORIZON
    decomposition_gap: float | None = None
    n_paths: int = 0


def _vec(f, arr):
    arr = np.asarray(arr, dtype=float)
    out = np.asarray(f(arr), dtype=float)
    if out.shape != arr.shape:
        out = np.array([float(f(float(v))) for v in arr])
    return out


def _trajectory_nodes(problem, strat, step):
    """Simulation nodes clipped to the exit, with the exit point appended."""
    traj = dynamics.simulate(problem, strat, step)
    tau = traj.exit_time
    x_end = traj.state_at_exit()
    mask = traj.times < tau
    ts = np.append(traj.times[mask], tau)
    xs = np.append(traj.states[mask], x_end)
    return traj, ts, xs


def _legwise_integral(problem, strat, ts, xs, integrand):
    """Sum of Simpson integrals between consecutive strategy kinks.

    integrand(leg_ts, leg_xs, nu) -> values; nu is the constant trade rate
    on the leg for piecewise strategies and a per-node array for feedback
    rules (whose kinks the dense grid has to resolve on its own).
    """
    tau = float(ts[-1])
    if tau <= 0.0:
        return 0.0
    if strat.is_piecewise:
        cuts = [t for t in strat.switch_times if 0.0 < t < tau]
    else:
        cuts = []
    bounds = [0.0] + cuts + [tau]
    total = 0.0
    for a, b in zip(bounds, bounds[1:]):
        sel = (ts >= a) & (ts <= b)
        leg_ts = ts[sel]
        leg_xs = xs[sel]
        if leg_ts.size < 2:
            continue
        if strat.is_piecewise:
            nu = strat.value_at(0.5 * (a + b))
        else:
            nu = np.array([strat.rule(float(t), float(x))
                           for t, x in zip(leg_ts, leg_xs)])
        total += float(simpson(integrand(leg_ts, leg_xs, nu), x=leg_ts))
    return total


def evaluate_j2(problem, strat: dynamics.Strategy, step=None) -> float:
    """Deterministic trading objective of a strategy.

    Simulates, then integrates the running utility minus the price cost up
    to the exit and adds the discounted terminal utility there.  Composite
    Simpson on the simulation grid, legwise between switch times.
    """
    spec = problem.util
    traj, ts, xs = _trajectory_nodes(problem, strat, step)
    tau = traj.exit_time
    x_end = traj.state_at_exit()
    if spec is not None:
        value = np.exp(-problem.beta * tau) * float(spec.h_fun(x_end))
    else:
        value = 0.0

    def integrand(leg_ts, leg_xs, nu):
        run = np.exp(-problem.beta * leg_ts) * (_vec(spec.l_fun, leg_xs)
                                                if spec is not None else 0.0)
        return run - np.asarray(problem.discounted_price(leg_ts)) * nu

    return float(value + _legwise_integral(problem, strat, ts, xs, integrand))


def evaluate_parity_cost(problem, strat: dynamics.Strategy, step=None) -> float:
    """Discounted tracking cost of a strategy under the parity penalty."""
    pen = problem.penalty
    if pen is None:
        raise ConfigurationError("evaluate_parity_cost needs a penalty spec")
    traj, ts, xs = _trajectory_nodes(problem, strat, step)
    tau = traj.exit_time
    x_end = traj.state_at_exit()
    n_tau = float(reward.total_supply(problem.sched, tau))
    cost = np.exp(-pen.delta * tau) * float(pen.q_fun(x_end - n_tau / pen.K))

    def integrand(leg_ts, leg_xs, nu):
        n_leg = np.asarray(reward.total_supply(problem.sched, leg_ts), dtype=float)
        return np.exp(-pen.delta * leg_ts) * _vec(
            pen.g_fun, leg_xs - n_leg / pen.K)

    return float(cost + _legwise_integral(problem, strat, ts, xs, integrand))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def evaluate_full_monte_carlo(problem, strat: dynamics.Strategy,
                              bank_policy=None, n_paths: int = 10_000,
                              seed: int = 0, step=None) -> ObjectiveReport:
    """Sample the full objective pathwise under the GBM price.

    The stake path is price-independent, so the only stochastic term is
    the trading cash flow minus integral of e^(-beta t) P(t) nu(t) dt; the
    bank account enters through its integrated-by-parts deterministic
    value, which requires a continuous policy with b(0) = 0.  Returns the
    mean, a 3-sigma half-width and the gap to the j1 + j2 decomposition.
    """
    pm = problem.price
    if pm is None or pm.variant != price_mod.GBM:
        raise ConfigurationError("Monte Carlo evaluation needs a GBM price model")
    if n_paths < 2:
        raise ConfigurationError("need at least 2 paths")

    j2 = evaluate_j2(problem, strat, step)
    _, ts_fine, xs_fine = _trajectory_nodes(problem, strat, step)
    price_term = _legwise_integral(
        problem, strat, ts_fine, xs_fine,
        lambda leg_ts, leg_xs, nu: np.asarray(
            problem.discounted_price(leg_ts)) * nu * np.ones_like(leg_ts))
    utility_part = j2 + price_term
    tau = float(ts_fine[-1])

    if bank_policy is None:
        bank_policy = lambda t: 0.0
    b0 = float(bank_policy(0.0))
    if abs(b0) > 1e-9:
        raise ConfigurationError(f"bank policy must start at 0, got b(0)={b0}")
    j1, _ = quad(lambda t: np.exp(-problem.beta * t) * float(bank_policy(t)),
                 0.0, tau, epsabs=1e-14, epsrel=1e-11, limit=200)
    j1 *= (problem.r - problem.beta)

    # coarser grid for the stochastic integral; switch nodes stay forced
    mc_step = problem.horizon / MC_GRID_CELLS
    _, ts, xs = _trajectory_nodes(problem, strat, mc_step)
    if np.min([float(bank_policy(t)) for t in ts]) < -1e-12:
        raise ConfigurationError("bank policy must be nonnegative")

    # trapezoid weights with the trade rate constant inside each cell
    weights = np.zeros_like(ts)
    disc = np.exp(-problem.beta * ts)
    for i in range(ts.size - 1):
        h = ts[i + 1] - ts[i]
        if strat.is_piecewise:
            nu_cell = strat.value_at(0.5 * (ts[i] + ts[i + 1]))
        else:
            nu_cell = strat.rule(float(ts[i]), float(xs[i]))
        weights[i] += 0.5 * h * nu_cell * disc[i]
        weights[i + 1] += 0.5 * h * nu_cell * disc[i + 1]

    base = utility_part + j1
    totals = np.empty(n_paths)
    done = 0
    chunk_index = 0
    while done < n_paths:
        m = min(MC_CHUNK, n_paths - done)
        paths = price_mod.sample_price_paths_chunk(pm, seed, chunk_index, ts, m)
        totals[done:done + m] = base - paths @ weights
        done += m
        chunk_index += 1

    mean = float(np.mean(totals))
    half = 3.0 * float(np.std(totals, ddof=1)) / float(np.sqrt(n_paths))
    traj = dynamics.simulate(problem, strat, step)
    return ObjectiveReport(
        j2=float(j2), j1=float(j1), mc_mean=mean, mc_halfwidth=half,
        exit_time=traj.exit_time, exit_kind=traj.exit_kind,
        decomposition_gap=abs(mean - (j1 + j2)), n_paths=n_paths)


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------

def brute_force_best(problem, m_intervals: int,
                     levels_per_interval: int = 3):
    """Exhaustive search over piecewise-constant strategies.

    m equal cells, each taking one of levels_per_interval rates evenly
    spaced over [-nu_bar, nu_bar] (the default 3 gives sell/hold/buy).
    Trading problems maximize the deterministic objective; pure parity
    problems minimize the tracking cost.  Non-exiting patterns are scored
    with exact per-cell characteristics and vectorized Simpson; exiting
    ones fall back to the simulating evaluators.
    """
    if not 1 <= m_intervals <= BRUTE_FORCE_MAX_INTERVALS:
        raise ConfigurationError(
            f"m_intervals must be in [1, {BRUTE_FORCE_MAX_INTERVALS}]")
    if levels_per_interval < 2:
        raise ConfigurationError("need at least 2 levels per interval")
    n_pat = levels_per_interval ** m_intervals
    if n_pat > BRUTE_FORCE_MAX_PATTERNS:
        raise ConfigurationError(
            f"{levels_per_interval}^{m_intervals} = {n_pat} patterns exceed "
            f"the cap of {BRUTE_FORCE_MAX_PATTERNS}")

    parity_mode = (problem.penalty is not None and problem.util is None
                   and problem.price is None)
    if not parity_mode and problem.util is None:
        raise ConfigurationError(
            "brute force needs a utility spec (or a pure parity problem)")

    sched = problem.sched
    T = problem.horizon
    m = m_intervals
    edges = np.linspace(0.0, T, m + 1)
    level_menu = np.linspace(-problem.nu_bar, problem.nu_bar,
                             levels_per_interval)
    patterns = np.array(list(itertools.product(range(levels_per_interval),
                                               repeat=m)), dtype=int)
    lv = level_menu[patterns]                                # (n_pat, m)

    cell_integral = np.array([reward.inverse_supply_integral(
        sched, edges[j], edges[j + 1]) for j in range(m)])
    shares = np.empty((n_pat, m + 1))
    shares[:, 0] = problem.x / problem.initial_supply
    for j in range(m):
        shares[:, j + 1] = shares[:, j] + lv[:, j] * cell_integral[j]
    feasible = np.all((shares > dynamics.SHARE_SLACK)
                      & (shares < 1.0 - dynamics.SHARE_SLACK), axis=1)

    values = np.full(n_pat, -np.inf if not parity_mode else np.inf)
    f_idx = np.flatnonzero(feasible)
    if f_idx.size:
        values[f_idx] = _score_feasible(problem, edges, cell_integral,
                                        lv[f_idx], shares[f_idx], parity_mode)
    for k in np.flatnonzero(~feasible):
        strat = _pattern_strategy(edges, lv[k])
        if parity_mode:
            values[k] = evaluate_parity_cost(problem, strat, step=T / 2048)
        else:
            values[k] = evaluate_j2(problem, strat, step=T / 2048)

    best = int(np.argmin(values) if parity_mode else np.argmax(values))
    return _pattern_strategy(edges, lv[best]), float(values[best])


def _pattern_strategy(edges, levels_row):
    return dynamics.Strategy.piecewise_constant(
        [float(t) for t in edges[1:-1]], [float(v) for v in levels_row])


def _score_feasible(problem, edges, cell_integral, lv, shares, parity_mode):
    """Exact-characteristic scoring of patterns that never exit."""
    sched = problem.sched
    m = edges.size - 1
    pen = problem.penalty
    spec = problem.util
    total = np.zeros(lv.shape[0])

    for j in range(m):
        a, b = float(edges[j]), float(edges[j + 1])
        t_nodes = np.linspace(a, b, _CELL_NODES)
        h_sub = (b - a) / (_CELL_NODES - 1)
        w = np.full(_CELL_NODES, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h_sub / 3.0
        n_nodes = np.asarray(reward.total_supply(sched, t_nodes), dtype=float)
        i_nodes = reward.inverse_supply_integral_from(sched, a, t_nodes)
        x_nodes = n_nodes[None, :] * (shares[:, j][:, None]
                                      + lv[:, j][:, None] * i_nodes[None, :])
        if parity_mode:
            run = np.exp(-pen.delta * t_nodes)[None, :] * _vec2(
                pen.g_fun, x_nodes - (n_nodes / pen.K)[None, :])
            total += run @ w
        else:
            run = np.exp(-problem.beta * t_nodes)[None, :] * _vec2(
                spec.l_fun, x_nodes)
            total += run @ w
            if problem.price is not None:
                from .strategies import _price_integral
                total -= lv[:, j] * _price_integral(problem, a, b)

    T = float(edges[-1])
    n_T = float(reward.total_supply(sched, T))
    x_T = shares[:, -1] * n_T
    if parity_mode:
        total += np.exp(-pen.delta * T) * _vec2(pen.q_fun, x_T - n_T / pen.K)
    else:
        total += np.exp(-problem.beta * T) * _vec2(spec.h_fun, x_T)
    return total


def _vec2(f, arr2d):
    out = np.asarray(f(arr2d), dtype=float)
    if out.shape != arr2d.shape:
        out = np.vectorize(lambda v: float(f(float(v))))(arr2d)
    return out
