"""Finite-difference solver for the dynamic-programming value function.

Works in normalized coordinates y = x/N(t): with w(t, y) = v(t, yN(t)) the
supply-growth drift cancels against the coordinate motion and the equation
lives on the fixed strip [0, 1].  The scheme is explicit Euler backward in
time with a monotone Godunov upwind resolution of the trading Hamiltonian
sup_{|nu| <= nu_bar} nu (w_y / N - p); monotone + consistent + CFL-stable
gives convergence to the viscosity solution.

Three variants share one core loop and differ only in their running,
terminal and boundary data:

  Hoarding     utility terms, price forced to zero
  Trading      utility terms plus the discounted price in the Hamiltonian
  RiskControl  Trading data minus the parity penalty (g running, q terminal
               and boundary); with no utility and no price this computes
               the negated stake-parity cost
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import reward
from .errors import ConfigurationError, NumericsError

HOARDING = "Hoarding"
TRADING = "Trading"
RISK_CONTROL = "RiskControl"
VARIANTS = (HOARDING, TRADING, RISK_CONTROL)
_VARIANT_IDS = {HOARDING: 0, TRADING: 1, RISK_CONTROL: 2}
_ID_VARIANTS = {v: k for k, v in _VARIANT_IDS.items()}

CFL_TARGET = 0.9
MAX_TIME_STEPS = 2_000_000
_HEADER = struct.Struct("<qqdq")


@dataclass
class ValueGrid:
    """Solved value function on the normalized strip.

    values[i, j] = w(times[i], shares[j]).  Slices are row-major in time.
    The originating problem rides along for feedback extraction; binary
    round trips drop it and keep only the fingerprint-free header.
    """
    nt: int
    ny: int
    times: np.ndarray
    shares: np.ndarray
    values: np.ndarray
    variant: str
    fingerprint: str | None = None
    problem: object = None

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


def _vec_eval(f, arr):
    arr = np.asarray(arr, dtype=float)
    out = np.asarray(f(arr), dtype=float)
    if out.shape != arr.shape:
        out = np.array([float(f(float(v))) for v in arr])
    return out


def _variant_data(problem, variant):
    """Running/terminal/boundary callables for one variant.

    Shared arithmetic is laid out so that degenerate inputs (zero penalty,
    zero price) reproduce the plainer variant bit for bit.
    """
    sched = problem.sched
    beta = problem.beta
    spec = problem.util
    pen = problem.penalty

    if variant in (HOARDING, TRADING):
        if spec is None:
            raise ConfigurationError(f"variant {variant} needs a utility spec")
    if variant == RISK_CONTROL and pen is None:
        raise ConfigurationError("variant RiskControl needs a penalty spec")

    if spec is not None:
        l_fun, h_fun = spec.l_fun, spec.h_fun
    else:
        l_fun = h_fun = lambda x: np.zeros_like(np.asarray(x, dtype=float))

    def n_of(t):
        return float(reward.total_supply(sched, t))

    def run(t, x):
        out = np.exp(-beta * t) * _vec_eval(l_fun, x)
        if variant == RISK_CONTROL:
            out = out - np.exp(-pen.delta * t) * _vec_eval(
                pen.g_fun, np.asarray(x, dtype=float) - n_of(t) / pen.K)
        return out

    def terminal(t, x):
        out = np.exp(-beta * t) * _vec_eval(h_fun, x)
        if variant == RISK_CONTROL:
            out = out - np.exp(-pen.delta * t) * _vec_eval(
                pen.q_fun, np.asarray(x, dtype=float) - n_of(t) / pen.K)
        return out

    def bc0(t):
        out = np.exp(-beta * t) * float(h_fun(0.0))
        if variant == RISK_CONTROL:
            # absorption rows carry the terminal penalty only; the running
            # g between absorption and the horizon is deliberately excluded
            out -= np.exp(-pen.delta * t) * float(pen.q_fun(-n_of(t) / pen.K))
        return out

    def bc1(t):
        n_t = n_of(t)
        out = np.exp(-beta * t) * float(h_fun(n_t))
        if variant == RISK_CONTROL:
            out -= np.exp(-pen.delta * t) * float(pen.q_fun(n_t - n_t / pen.K))
        return out

    if variant == HOARDING:
        price = lambda t: 0.0
    else:
        price = lambda t: float(problem.discounted_price(t))

    return run, terminal, bc0, bc1, price


def solve(problem, variant: str, nt: int = 512, ny: int = 512) -> ValueGrid:
    """Solve the value function backward in time on an (nt x ny) grid.

    nt is auto-refined upward until the CFL number dt*(nu_bar/N(0))/dy
    stays at or below 0.9; ny is never changed.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if nt < 16 or ny < 16:
        raise ConfigurationError("grid sizes must be at least 16")
    sched = problem.sched
    T = problem.horizon
    nb = problem.nu_bar
    n_min = float(reward.total_supply(sched, 0.0))   # supply never shrinks

    dy = 1.0 / ny
    sigma = (T / nt) * (nb / n_min) / dy
    if sigma > CFL_TARGET:
        nt = int(np.ceil(T * nb / (n_min * dy * CFL_TARGET)))
        if nt > MAX_TIME_STEPS:
            raise NumericsError(
                f"CFL refinement needs {nt} time steps, beyond the budget "
                f"of {MAX_TIME_STEPS}")

    run, terminal, bc0, bc1, price = _variant_data(problem, variant)

    times = np.linspace(0.0, T, nt + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    values = np.empty((nt + 1, ny + 1), dtype=float)

    n_T = float(reward.total_supply(sched, T))
    w = np.asarray(terminal(T, ys * n_T), dtype=float)
    w[0] = bc0(T)
    w[-1] = bc1(T)
    values[nt] = w

    for n in range(nt - 1, -1, -1):
        t_up = float(times[n + 1])
        t_now = float(times[n])
        dt = t_up - t_now
        n_up = float(reward.total_supply(sched, t_up))
        c = price(t_up)

        dp = np.diff(w) / dy
        forward = dp[1:] / n_up - c
        backward = dp[:-1] / n_up - c
        ham = nb * np.maximum(np.maximum(forward, 0.0),
                              np.maximum(-backward, 0.0))
        source = run(t_up, ys[1:-1] * n_up)

        wn = np.empty_like(w)
        wn[1:-1] = w[1:-1] + dt * (source + ham)
        wn[0] = bc0(t_now)
        wn[-1] = bc1(t_now)
        if not np.all(np.isfinite(wn)):
            bad = int(np.argmin(np.isfinite(wn)))
            raise NumericsError(
                f"non-finite value at t={t_now:.6g}, y={ys[bad]:.6g}",
                failing_time=t_now)
        values[n] = wn
        w = wn

    return ValueGrid(nt=nt, ny=ny, times=times, shares=ys, values=values,
                     variant=variant, fingerprint=problem.fingerprint(),
                     problem=problem)


def _locate(grid_axis: np.ndarray, v: float):
    """Index pair and interpolation weight; weight exactly 0 on a node."""
    idx = int(np.searchsorted(grid_axis, v))
    if idx < len(grid_axis) and grid_axis[idx] == v:
        return idx, idx, 0.0
    if idx == 0 or idx == len(grid_axis):
        raise ValueError(f"coordinate {v} outside the grid range "
                         f"[{grid_axis[0]}, {grid_axis[-1]}]")
    lo = idx - 1
    u = (v - grid_axis[lo]) / (grid_axis[idx] - grid_axis[lo])
    return lo, idx, float(u)


def value_at(grid: ValueGrid, t: float, x: float) -> float:
    """Bilinear interpolation of w at (t, x); exact at grid nodes."""
    if grid.problem is None:
        raise ConfigurationError(
            "this grid carries no problem (binary round trip?); value_at "
            "needs the supply schedule to normalize x")
    n_t = float(reward.total_supply(grid.problem.sched, t))
    y = x / n_t
    tol = 1e-12
    if y < -tol or y > 1.0 + tol:
        raise ValueError(f"x={x} is outside [0, N(t)={n_t}]")
    y = min(max(y, 0.0), 1.0)
    i0, i1, ut = _locate(grid.times, float(t))
    j0, j1, uy = _locate(grid.shares, float(y))
    v = grid.values
    return float((1.0 - ut) * ((1.0 - uy) * v[i0, j0] + uy * v[i0, j1])
                 + ut * ((1.0 - uy) * v[i1, j0] + uy * v[i1, j1]))


def extract_feedback(grid: ValueGrid):
    """Bang-bang feedback rule from the solved grid.

    nu*(t, x) = nu_bar * sign(w_y / N(t) - discounted price), with centered
    differences in the interior and one-sided at the strip edges; the
    y-derivative field is interpolated bilinearly at query points.  Ties
    within 1e-12 of the value scale resolve to buying.
    """
    from . import dynamics

    if grid.problem is None:
        raise ConfigurationError("this grid carries no problem; cannot "
                                 "rebuild the price curve for feedback")
    problem = grid.problem
    nb = problem.nu_bar
    sched = problem.sched
    use_price = grid.variant != HOARDING

    dy = float(grid.shares[1] - grid.shares[0])
    deriv = np.empty_like(grid.values)
    deriv[:, 1:-1] = (grid.values[:, 2:] - grid.values[:, :-2]) / (2.0 * dy)
    deriv[:, 0] = (grid.values[:, 1] - grid.values[:, 0]) / dy
    deriv[:, -1] = (grid.values[:, -1] - grid.values[:, -2]) / dy
    scale = max(1.0, float(np.abs(grid.values).max()))
    tie = 1e-12 * scale

    def rule(t: float, x: float) -> float:
        n_t = float(reward.total_supply(sched, t))
        y = min(max(x / n_t, 0.0), 1.0)
        tq = min(max(float(t), float(grid.times[0])), float(grid.times[-1]))
        i0, i1, ut = _locate(grid.times, tq)
        j0, j1, uy = _locate(grid.shares, y)
        d = ((1.0 - ut) * ((1.0 - uy) * deriv[i0, j0] + uy * deriv[i0, j1])
             + ut * ((1.0 - uy) * deriv[i1, j0] + uy * deriv[i1, j1]))
        p = float(problem.discounted_price(t)) if use_price else 0.0
        gap = d / n_t - p
        return nb if gap >= -tie else -nb

    return dynamics.Strategy.feedback(rule)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def to_csv(grid: ValueGrid, path: str) -> None:
    """Long-form dump: one `t,y,w` row per grid node."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,y,w\n")
        for i, t in enumerate(grid.times):
            row = grid.values[i]
            for j, y in enumerate(grid.shares):
                fh.write(f"{t:.17g},{y:.17g},{row[j]:.17g}\n")


def to_binary(grid: ValueGrid, path: str) -> None:
    """Compact dump: (nt, ny, T, variant id) header, row-major float64."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.nt, grid.ny, grid.horizon,
                              _VARIANT_IDS[grid.variant]))
        fh.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())


def from_binary(path: str) -> ValueGrid:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ConfigurationError(f"{path}: truncated grid header")
        nt, ny, T, vid = _HEADER.unpack(raw)
        if vid not in _ID_VARIANTS:
            raise ConfigurationError(f"{path}: unknown variant id {vid}")
        body = np.frombuffer(fh.read(), dtype="<f8")
    if body.size != (nt + 1) * (ny + 1):
        raise ConfigurationError(
            f"{path}: expected {(nt + 1) * (ny + 1)} values, got {body.size}")
    return ValueGrid(nt=int(nt), ny=int(ny),
                     times=np.linspace(0.0, T, int(nt) + 1),
                     shares=np.linspace(0.0, 1.0, int(ny) + 1),
                     values=body.reshape(int(nt) + 1, int(ny) + 1).copy(),
                     variant=_ID_VARIANTS[vid])
