"""Stake supply schedules N(t) and derived quantities.

The polynomial family N(t) = (N0^(1/alpha) + t)^alpha covers constant-rate
rewards (alpha = 1), decaying rewards (alpha < 1) and growing rewards
(alpha > 1).  Tabulated schedules interpolate user data with a monotone
cubic, which keeps N non-decreasing but is only C1; they carry an
``approximate_smoothness`` flag so downstream consumers can warn.

All heavy consumers (the HJB solver, the simulator) call these functions
on numpy arrays; scalars work as well.
"""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import ConfigurationError

QUAD_REL_TOL = 1e-10
QUAD_ABS_TOL = 1e-14

# alpha beyond this overflows double precision for modest N0 and t.
ALPHA_MAX = 8.0

_DOMAIN_SLACK = 1e-9


class RewardSchedule:
    """Total-supply curve N(t) on [0, T].

    Use the constructors :meth:`polynomial`, :meth:`tabulated` or
    :meth:`from_csv`.  Instances are immutable by convention and safe to
    share across threads.
    """

    def __init__(self, kind, horizon, alpha=None, initial_supply=None,
                 knots=None):
        self.kind = kind
        self.horizon = float(horizon)
        self.alpha = alpha
        self.initial_supply = initial_supply
        self.knots = knots
        self.approximate_smoothness = kind == "tabulated"
        self._interp = None
        self._interp_deriv = None
        if self.horizon <= 0.0:
            raise ConfigurationError("horizon must be positive")
        if kind == "tabulated":
            ts = np.asarray([k[0] for k in knots], dtype=float)
            ns = np.asarray([k[1] for k in knots], dtype=float)
            self._interp = PchipInterpolator(ts, ns, extrapolate=False)
            self._interp_deriv = self._interp.derivative()

    @classmethod
    def polynomial(cls, alpha: float, initial_supply: float,
                   horizon: float) -> "RewardSchedule":
        """Schedule N(t) = (N0^(1/alpha) + t)^alpha."""
        if not 0.0 < alpha <= ALPHA_MAX:
            raise ConfigurationError(
                f"alpha must lie in (0, {ALPHA_MAX}], got {alpha}")
        if initial_supply <= 0.0:
            raise ConfigurationError("initial supply must be positive")
        return cls("polynomial", horizon, alpha=float(alpha),
                   initial_supply=float(initial_supply))

    @classmethod
    def tabulated(cls, knots, horizon=None) -> "RewardSchedule":
        """Schedule through (t, N(t)) knots, monotone cubic in between.

        Knots must start at t = 0 with strictly increasing times and
        non-decreasing positive supply.  The horizon defaults to the last
        knot time.
        """
        knots = [(float(t), float(n)) for t, n in knots]
        if len(knots) < 2:
            raise ConfigurationError("tabulated schedule needs >= 2 knots")
        if knots[0][0] != 0.0:
            raise ConfigurationError("first knot must be at t = 0")
        for i in range(1, len(knots)):
            if knots[i][0] <= knots[i - 1][0]:
                raise ConfigurationError(
                    f"knot times must be strictly increasing (row {i + 1})")
            if knots[i][1] < knots[i - 1][1]:
                raise ConfigurationError(
                    f"supply must be non-decreasing (row {i + 1})")
        if any(n <= 0.0 for _, n in knots):
            raise ConfigurationError("supply must stay positive")
        horizon = knots[-1][0] if horizon is None else float(horizon)
        if horizon > knots[-1][0]:
            raise ConfigurationError("horizon extends past the last knot")
        sched = cls("tabulated", horizon, knots=knots)
        sched.initial_supply = knots[0][1]
        return sched

    @classmethod
    def from_csv(cls, path) -> "RewardSchedule":
        """Read a tabulated schedule from a CSV file with header ``t,N``."""
        knots = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:2]] != ["t", "N"]:
                raise ConfigurationError(f"{path}:1: expected header 't,N'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    knots.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    raise ConfigurationError(
                        f"{path}:{lineno}: cannot parse '{','.join(row)}'")
        try:
            return cls.tabulated(knots)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc

    def __repr__(self):
        if self.kind == "polynomial":
            return (f"RewardSchedule.polynomial(alpha={self.alpha}, "
                    f"initial_supply={self.initial_supply}, "
                    f"horizon={self.horizon})")
        return (f"RewardSchedule.tabulated({len(self.knots)} knots, "
                f"horizon={self.horizon})")

    def fingerprint(self) -> str:
        return repr(self)


def _check_domain(sched: RewardSchedule, t) -> None:
    t = np.asarray(t, dtype=float)
    slack = _DOMAIN_SLACK * max(1.0, sched.horizon)
    if t.size and (float(t.min()) < -slack or float(t.max()) > sched.horizon + slack):
        raise ValueError(
            f"time outside [0, {sched.horizon}]: range "
            f"[{float(t.min())}, {float(t.max())}]")


def total_supply(sched: RewardSchedule, t):
    """N(t).  Accepts scalars or arrays."""
    _check_domain(sched, t)
    if sched.kind == "polynomial":
        root = sched.initial_supply ** (1.0 / sched.alpha)
        return (root + np.asarray(t, dtype=float)) ** sched.alpha
    out = sched._interp(np.clip(t, 0.0, sched.horizon))
    return out if np.ndim(t) else float(out)


def reward_rate(sched: RewardSchedule, t):
    """N'(t), the instantaneous reward rate."""
    _check_domain(sched, t)
    if sched.kind == "polynomial":
        root = sched.initial_supply ** (1.0 / sched.alpha)
        return sched.alpha * (root + np.asarray(t, dtype=float)) ** (sched.alpha - 1.0)
    out = sched._interp_deriv(np.clip(t, 0.0, sched.horizon))
    return out if np.ndim(t) else float(out)


def inverse_supply_integral(sched: RewardSchedule, t0: float, t1: float) -> float:
    """Integral of ds / N(s) over [t0, t1].

    Closed form for polynomial schedules, adaptive quadrature otherwise.
    """
    if t1 < t0:
        raise ValueError(f"need t0 <= t1, got t0={t0}, t1={t1}")
    _check_domain(sched, [t0, t1])
    if t0 == t1:
        return 0.0
    if sched.kind == "polynomial":
        a = sched.alpha
        root = sched.initial_supply ** (1.0 / a)
        if a == 1.0:
            # log1p keeps precision when t1 - t0 is tiny relative to root
            return math.log1p((t1 - t0) / (root + t0))
        return ((t1 + root) ** (1.0 - a) - (t0 + root) ** (1.0 - a)) / (1.0 - a)
    val, _ = quad(lambda s: 1.0 / float(sched._interp(s)), t0, t1,
                  epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL, limit=200)
    return val


def inverse_supply_integral_from(sched: RewardSchedule, t0: float, t1):
    """Vectorized integral of ds / N(s) from t0 to each element of t1."""
    t1 = np.asarray(t1, dtype=float)
    if t1.size and float(t1.min()) < t0:
        raise ValueError("need t0 <= t1 elementwise")
    _check_domain(sched, t1)
    if sched.kind == "polynomial":
        a = sched.alpha
        root = sched.initial_supply ** (1.0 / a)
        if a == 1.0:
            return np.log1p((t1 - t0) / (root + t0))
        return ((t1 + root) ** (1.0 - a) - (t0 + root) ** (1.0 - a)) / (1.0 - a)
    return np.array([inverse_supply_integral(sched, t0, float(s)) for s in t1])


def invert_supply_integral(sched: RewardSchedule, target: float):
    """Smallest t in [0, T] with integral_0^t ds/N(s) = target, or None.

    Returns None when the integral over the whole horizon stays strictly
    below the target; returns T exactly on equality.
    """
    if target < 0.0:
        raise ValueError("target must be non-negative")
    if target == 0.0:
        return 0.0
    total = inverse_supply_integral(sched, 0.0, sched.horizon)
    if total < target:
        return None
    if total == target:
        return sched.horizon
    if sched.kind == "polynomial":
        a = sched.alpha
        root = sched.initial_supply ** (1.0 / a)
        if a == 1.0:
            return root * math.expm1(target)
        base = root ** (1.0 - a) + (1.0 - a) * target
        # reachability was checked against the horizon above, so base > 0
        return base ** (1.0 / (1.0 - a)) - root
    from scipy.optimize import brentq
    return brentq(lambda t: inverse_supply_integral(sched, 0.0, t) - target,
                  0.0, sched.horizon, xtol=1e-12)
