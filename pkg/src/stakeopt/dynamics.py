"""Stake dynamics: characteristics, simulation, exit detection.

The state follows X'(t) = nu(t) + (N'(t)/N(t)) X(t) between the absorbing
boundaries X = 0 and X = N(t).  For constant nu the solution is a
characteristic curve available in closed form; the simulator handles
arbitrary strategies with classical RK4 plus bisection for the first
boundary hit.
"""

from __future__ import annotations

import numpy as np

from . import reward
from .errors import ConfigurationError, NumericsError

HORIZON = "horizon"
RUIN = "ruin"
MONOPOLY = "monopoly"

# exits are detected on the share X/N with this relative slack, which makes
# tangential touches of the boundary count as hits
SHARE_SLACK = 1e-9

EXIT_TIME_TOL = 1e-9

DEFAULT_STEPS = 4096


class Strategy:
    """Open-loop piecewise-constant trading rates, or a feedback rule."""

    def __init__(self, variant, switch_times=None, levels=None, rule=None):
        self.variant = variant
        self.switch_times = switch_times
        self.levels = levels
        self.rule = rule

    @classmethod
    def piecewise_constant(cls, switch_times, levels) -> "Strategy":
        switch_times = [float(t) for t in switch_times]
        levels = [float(v) for v in levels]
        if len(levels) != len(switch_times) + 1:
            raise ConfigurationError(
                f"need one more level than switch times, got "
                f"{len(levels)} levels for {len(switch_times)} switches")
        if any(b <= a for a, b in zip(switch_times, switch_times[1:])):
            raise ConfigurationError("switch times must be strictly increasing")
        if switch_times and switch_times[0] <= 0.0:
            raise ConfigurationError("switch times must be interior, got t <= 0")
        return cls("piecewise", switch_times=switch_times, levels=levels)

    @classmethod
    def constant(cls, level: float) -> "Strategy":
        return cls.piecewise_constant([], [level])

    @classmethod
    def feedback(cls, rule) -> "Strategy":
        """rule(t, x) -> trade rate, queried at every RK4 stage."""
        return cls("feedback", rule=rule)

    @property
    def is_piecewise(self):
        return self.variant == "piecewise"

    def value_at(self, t: float) -> float:
        """Trade rate of a piecewise strategy at time t (right-continuous)."""
        if not self.is_piecewise:
            raise ConfigurationError("value_at needs a piecewise strategy")
        idx = int(np.searchsorted(np.asarray(self.switch_times), t, side="right"))
        return self.levels[idx]

    def max_level(self) -> float:
        if not self.is_piecewise:
            raise ConfigurationError("max_level needs a piecewise strategy")
        return max(abs(v) for v in self.levels)


class StateTrajectory:
    """Simulated path with exit bookkeeping.

    states are frozen at the exit value for grid times past exit_time.
    """

    def __init__(self, times, states, supply, exit_time, exit_kind):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.supply = np.asarray(supply, dtype=float)
        self.exit_time = float(exit_time)
        self.exit_kind = exit_kind

    @property
    def shares(self) -> np.ndarray:
        return self.states / self.supply

    def state_at_exit(self) -> float:
        # states are frozen from the first node at or after exit_time on,
        # so that node holds the exact boundary (or final) value
        idx = int(np.searchsorted(self.times, self.exit_time, side="left"))
        return float(self.states[min(max(idx, 0), self.states.size - 1)])


def characteristic(sched: reward.RewardSchedule, t: float, x: float, s,
                   direction: int, nu_bar: float):
    """State at time s when trading at direction * nu_bar from (t, x).

    No clamping: the value may leave [0, N(s)]; callers detect exits.
    Accepts an array of s values.
    """
    s_arr = np.asarray(s, dtype=float)
    if float(s_arr.min() if s_arr.ndim else s_arr) < t:
        raise ValueError(f"need s >= t, got s={s}, t={t}")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    n_t = reward.total_supply(sched, t)
    n_s = reward.total_supply(sched, s_arr)
    if s_arr.ndim == 0:
        integ = reward.inverse_supply_integral(sched, t, float(s_arr))
        return float(direction * nu_bar * n_s * integ + x * n_s / n_t)
    integ = reward.inverse_supply_integral_from(sched, t, s_arr)
    return direction * nu_bar * n_s * integ + x * n_s / n_t


_PATTERNS = ("++", "--", "+-", "-+")


def two_phase_characteristic(sched: reward.RewardSchedule, x: float, t: float,
                             s: float, pattern: str, nu_bar: float) -> float:
    """State at s after trading sign b on [0, t] and sign a on [t, s].

    The pattern string is "ab": the FIRST character is the sign after the
    switch, the SECOND the sign before it.  So "-+" buys up to t and sells
    afterwards.
    """
    if pattern not in _PATTERNS:
        raise ValueError(f"pattern must be one of {_PATTERNS}, got {pattern!r}")
    if not 0.0 <= t <= s:
        raise ValueError(f"need 0 <= t <= s, got t={t}, s={s}")
    after = 1.0 if pattern[0] == "+" else -1.0
    before = 1.0 if pattern[1] == "+" else -1.0
    n0 = reward.total_supply(sched, 0.0)
    n_s = reward.total_supply(sched, s)
    return float((after * nu_bar * reward.inverse_supply_integral(sched, t, s)
                  + before * nu_bar * reward.inverse_supply_integral(sched, 0.0, t)
                  + x / n0) * n_s)


def monopoly_time(sched: reward.RewardSchedule, x: float, nu_bar: float):
    """Time at which buying at full capacity from x reaches the whole supply.

    None when the horizon is reached first (strictly); T on exact equality;
    0 when x is already the whole supply.
    """
    n0 = reward.total_supply(sched, 0.0)
    if not 0.0 <= x <= n0:
        raise ValueError(f"x must lie in [0, {n0}]")
    target = (n0 - x) / (n0 * nu_bar)
    return reward.invert_supply_integral(sched, target)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _build_grid(horizon: float, step, forced) -> np.ndarray:
    if step is None:
        step = horizon / DEFAULT_STEPS
    if step <= 0.0:
        raise ValueError("step must be positive")
    n = max(2, int(np.ceil(horizon / step)) + 1)
    grid = np.linspace(0.0, horizon, n)
    if forced:
        grid = np.union1d(grid, np.asarray(forced, dtype=float))
    return grid


def _rk4_coefficients(sched, grid):
    """Per-interval (A, B) with X_{i+1} = A_i X_i + B_i nu for constant nu.

    These are the exact RK4 update coefficients for the affine right-hand
    side nu + a(t) X, precomputed so piecewise-constant strategies advance
    with vector arithmetic instead of a Python-level stage loop.
    """
    t0 = grid[:-1]
    t1 = grid[1:]
    h = t1 - t0
    mid = 0.5 * (t0 + t1)
    a0 = np.asarray(reward.reward_rate(sched, t0) / reward.total_supply(sched, t0))
    am = np.asarray(reward.reward_rate(sched, mid) / reward.total_supply(sched, mid))
    a1 = np.asarray(reward.reward_rate(sched, t1) / reward.total_supply(sched, t1))
    p1 = a0
    q1 = np.ones_like(a0)
    p2 = am * (1.0 + 0.5 * h * p1)
    q2 = am * 0.5 * h * q1 + 1.0
    p3 = am * (1.0 + 0.5 * h * p2)
    q3 = am * 0.5 * h * q2 + 1.0
    p4 = a1 * (1.0 + h * p3)
    q4 = a1 * h * q3 + 1.0
    A = 1.0 + h * (p1 + 2.0 * p2 + 2.0 * p3 + p4) / 6.0
    B = h * (q1 + 2.0 * q2 + 2.0 * q3 + q4) / 6.0
    return A, B


def _advance_affine(A, B, x0, nu):
    """Solve X_{i+1} = A_i X_i + B_i nu_i for the whole grid at once."""
    cp = np.empty(A.size + 1)
    cp[0] = 1.0
    np.cumprod(A, out=cp[1:])
    acc = np.empty(A.size + 1)
    acc[0] = 0.0
    np.cumsum(B * nu / cp[1:], out=acc[1:])
    return cp * (x0 + acc)


def _rk4_single_step(sched, t, x, h, nu_fun):
    a = lambda tt: reward.reward_rate(sched, tt) / reward.total_supply(sched, tt)
    k1 = nu_fun(t, x) + a(t) * x
    k2 = nu_fun(t + 0.5 * h, x + 0.5 * h * k1) + a(t + 0.5 * h) * (x + 0.5 * h * k1)
    k3 = nu_fun(t + 0.5 * h, x + 0.5 * h * k2) + a(t + 0.5 * h) * (x + 0.5 * h * k2)
    k4 = nu_fun(t + h, x + h * k3) + a(t + h) * (x + h * k3)
    return x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def simulate(problem, strat: Strategy, step=None) -> StateTrajectory:
    """Integrate the stake ODE under the strategy, stopping at exits.

    The grid is uniform with switch times inserted as forced nodes.  The
    first time the share X/N touches 0 or 1 (relative slack 1e-9) is located
    by bisection inside the bracketing step and the state is frozen there.
    """
    sched = problem.sched
    horizon = problem.horizon
    if strat.is_piecewise:
        if strat.max_level() > problem.nu_bar * (1.0 + 1e-12):
            raise ConfigurationError(
                f"strategy level exceeds the bound nu_bar={problem.nu_bar}")
        if strat.switch_times and strat.switch_times[-1] >= horizon:
            raise ConfigurationError("switch times must be interior to [0, T]")
        grid = _build_grid(horizon, step, strat.switch_times)
    else:
        grid = _build_grid(horizon, step, None)
    supply = np.asarray(reward.total_supply(sched, grid), dtype=float)

    n0 = supply[0]
    share0 = problem.x / n0
    if share0 <= SHARE_SLACK or share0 >= 1.0 - SHARE_SLACK:
        kind = RUIN if share0 <= SHARE_SLACK else MONOPOLY
        states = np.full(grid.size, problem.x)
        return StateTrajectory(grid, states, supply, 0.0, kind)

    if strat.is_piecewise:
        A, B = _rk4_coefficients(sched, grid)
        idx = np.searchsorted(np.asarray(strat.switch_times), grid[:-1], side="right")
        nu = np.asarray(strat.levels, dtype=float)[idx]
        states = _advance_affine(A, B, problem.x, nu)
        nu_fun = lambda t, x: strat.value_at(min(t, horizon))
    else:
        def nu_fun(t, x):
            v = float(strat.rule(t, x))
            if abs(v) > problem.nu_bar * (1.0 + 1e-9):
                raise ConfigurationError(
                    f"feedback rule returned {v} beyond nu_bar={problem.nu_bar}")
            return v
        states = np.empty(grid.size)
        states[0] = problem.x
        for i in range(grid.size - 1):
            states[i + 1] = _rk4_single_step(
                sched, grid[i], states[i], grid[i + 1] - grid[i], nu_fun)

    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.isfinite(states)))
        raise NumericsError(f"non-finite state at t={grid[bad]}",
                            failing_time=float(grid[bad]))

    shares = states / supply
    hit = (shares <= SHARE_SLACK) | (shares >= 1.0 - SHARE_SLACK)
    if not np.any(hit):
        return StateTrajectory(grid, states, supply, horizon, HORIZON)

    n_hit = int(np.argmax(hit))
    upward = shares[n_hit] >= 1.0 - SHARE_SLACK
    kind = MONOPOLY if upward else RUIN
    t_lo, x_lo = grid[n_hit - 1], states[n_hit - 1]
    lo, hi = 0.0, grid[n_hit] - t_lo
    # bisect the step for the boundary crossing time
    while hi - lo > EXIT_TIME_TOL:
        mid = 0.5 * (lo + hi)
        xm = _rk4_single_step(sched, t_lo, x_lo, mid, nu_fun)
        sm = xm / reward.total_supply(sched, t_lo + mid)
        inside = SHARE_SLACK < sm < 1.0 - SHARE_SLACK
        if inside:
            lo = mid
        else:
            hi = mid
    exit_time = t_lo + hi
    n_exit = reward.total_supply(sched, exit_time)
    exit_state = n_exit if upward else 0.0
    states = states.copy()
    states[n_hit:] = exit_state
    return StateTrajectory(grid, states, supply, exit_time, kind)
