"""Utility and penalty specifications with their regularity checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from . import reward

_VALIDATION_POINTS = 256
_FD_STEP = 1e-6

LINEAR = "linear"
CONVEX = "convex"
CUSTOM = "custom"


class UtilitySpec:
    """Running utility l(x) and terminal utility h(x), both increasing and C1.

    ``l_coef``/``h_coef``/``power``/``rate`` are populated for the named
    families so classification code can use closed forms.
    """

    def __init__(self, shape, l_fun, h_fun, l_prime, h_prime,
                 l_coef=None, h_coef=None, power=None, rate=None):
        self.shape = shape
        self.l_fun = l_fun
        self.h_fun = h_fun
        self.l_prime = l_prime
        self.h_prime = h_prime
        self.l_coef = l_coef
        self.h_coef = h_coef
        self.power = power
        self.rate = rate

    @property
    def is_linear(self):
        return self.shape == LINEAR

    @property
    def is_convex(self):
        # linear counts: second derivatives vanish
        return self.shape in (LINEAR, CONVEX)

    @classmethod
    def linear(cls, l_coef: float, h_coef: float) -> "UtilitySpec":
        if l_coef <= 0.0 or h_coef <= 0.0:
            raise ConfigurationError("linear utility coefficients must be > 0")
        return cls(LINEAR,
                   lambda x: l_coef * x, lambda x: h_coef * x,
                   lambda x: l_coef * np.ones_like(np.asarray(x, dtype=float)),
                   lambda x: h_coef * np.ones_like(np.asarray(x, dtype=float)),
                   l_coef=l_coef, h_coef=h_coef)

    @classmethod
    def power(cls, p: float, l_coef: float, h_coef: float) -> "UtilitySpec":
        """l(x) = l_coef x^p, h(x) = h_coef x^p with p >= 1 (convex)."""
        if p < 1.0:
            raise ConfigurationError("power must satisfy p >= 1 for convexity")
        if l_coef <= 0.0 or h_coef <= 0.0:
            raise ConfigurationError("power utility coefficients must be > 0")
        return cls(CONVEX,
                   lambda x: l_coef * np.asarray(x, dtype=float) ** p,
                   lambda x: h_coef * np.asarray(x, dtype=float) ** p,
                   lambda x: l_coef * p * np.asarray(x, dtype=float) ** (p - 1.0),
                   lambda x: h_coef * p * np.asarray(x, dtype=float) ** (p - 1.0),
                   l_coef=l_coef, h_coef=h_coef, power=p)

    @classmethod
    def exponential(cls, rate: float, l_coef: float, h_coef: float) -> "UtilitySpec":
        """l(x) = l_coef (e^(rate x) - 1), convex for rate > 0."""
        if rate <= 0.0 or l_coef <= 0.0 or h_coef <= 0.0:
            raise ConfigurationError("exponential utility needs positive parameters")
        return cls(CONVEX,
                   lambda x: l_coef * np.expm1(rate * np.asarray(x, dtype=float)),
                   lambda x: h_coef * np.expm1(rate * np.asarray(x, dtype=float)),
                   lambda x: l_coef * rate * np.exp(rate * np.asarray(x, dtype=float)),
                   lambda x: h_coef * rate * np.exp(rate * np.asarray(x, dtype=float)),
                   l_coef=l_coef, h_coef=h_coef, rate=rate)

    @classmethod
    def custom(cls, l_fun, h_fun, l_prime=None, h_prime=None,
               convex: bool = False, check_range=(0.0, 1e3)) -> "UtilitySpec":
        """Wrap arbitrary callables; derivatives default to central differences.

        Monotonicity (and convexity when claimed) is verified on a sample
        grid over ``check_range``.
        """
        if l_prime is None:
            l_prime = _fd_derivative(l_fun)
        if h_prime is None:
            h_prime = _fd_derivative(h_fun)
        xs = np.linspace(check_range[0], check_range[1], _VALIDATION_POINTS)
        for name, f in (("l", l_fun), ("h", h_fun)):
            vals = np.asarray([float(f(x)) for x in xs])
            if np.any(np.diff(vals) < -1e-9 * max(1.0, np.abs(vals).max())):
                raise ConfigurationError(f"custom {name} is not non-decreasing")
            if convex:
                second = np.diff(vals, 2)
                if np.any(second < -1e-7 * max(1.0, np.abs(vals).max())):
                    raise ConfigurationError(f"custom {name} is not convex")
        return cls(CONVEX if convex else CUSTOM, l_fun, h_fun, l_prime, h_prime)


def _fd_derivative(f):
    def deriv(x):
        x = np.asarray(x, dtype=float)
        hstep = _FD_STEP * np.maximum(1.0, np.abs(x))
        lo = np.maximum(x - hstep, 0.0)
        return (np.asarray(f(x + hstep)) - np.asarray(f(lo))) / (x + hstep - lo)
    return deriv


def eval_utility(spec: UtilitySpec, which: str, x):
    """Utility value at x >= 0; ``which`` is 'running' or 'terminal'."""
    _check_nonnegative(x)
    if which == "running":
        return spec.l_fun(x)
    if which == "terminal":
        return spec.h_fun(x)
    raise ValueError(f"which must be 'running' or 'terminal', got {which!r}")


def eval_utility_derivative(spec: UtilitySpec, which: str, x):
    _check_nonnegative(x)
    if which == "running":
        return spec.l_prime(x)
    if which == "terminal":
        return spec.h_prime(x)
    raise ValueError(f"which must be 'running' or 'terminal', got {which!r}")


def _check_nonnegative(x):
    arr = np.asarray(x, dtype=float)
    if arr.size and float(arr.min()) < 0.0:
        raise ValueError("stakes must be non-negative")


@dataclass
class HoardingConditionCheck:
    holds: bool
    fails_at: float | None = None


def validate_hoarding_condition(spec: UtilitySpec, sched: reward.RewardSchedule,
                                beta: float, points: int = 2048) -> HoardingConditionCheck:
    """Check h(N(t))' + l(N(t)) <= beta h(N(t)) on a dense grid.

    This is the sufficient condition under which holding the whole supply
    after a monopoly exit is optimal.  Returns the first violating time when
    it fails.
    """
    ts = np.linspace(0.0, sched.horizon, points)
    n = np.asarray(reward.total_supply(sched, ts), dtype=float)
    nprime = np.asarray(reward.reward_rate(sched, ts), dtype=float)
    lhs = np.asarray(spec.h_prime(n), dtype=float) * nprime \
        + np.asarray(spec.l_fun(n), dtype=float)
    rhs = beta * np.asarray(spec.h_fun(n), dtype=float)
    bad = lhs > rhs + 1e-12 * np.maximum(1.0, np.abs(rhs))
    if np.any(bad):
        return HoardingConditionCheck(False, float(ts[int(np.argmax(bad))]))
    return HoardingConditionCheck(True)


class PenaltySpec:
    """Deviation penalties g (running) and q (terminal) with discount delta.

    Both must be symmetric, increasing on the positive half line and
    minimized at zero; K >= 2 is the participant count whose average
    N(t)/K the deviation is measured against.
    """

    def __init__(self, g_fun, q_fun, delta, K, g_coef=None, q_coef=None):
        if delta <= 0.0:
            raise ConfigurationError("penalty discount delta must be > 0")
        if int(K) != K or K < 2:
            raise ConfigurationError("participant count K must be an integer >= 2")
        self.g_fun = g_fun
        self.q_fun = q_fun
        self.delta = float(delta)
        self.K = int(K)
        self.g_coef = g_coef
        self.q_coef = q_coef
        self._validate()

    def _validate(self):
        xs = np.linspace(0.0, 100.0, _VALIDATION_POINTS)
        for name, f in (("g", self.g_fun), ("q", self.q_fun)):
            pos = np.asarray([float(f(x)) for x in xs])
            neg = np.asarray([float(f(-x)) for x in xs])
            if np.any(np.abs(pos - neg) > 1e-12 * np.maximum(1.0, np.abs(pos))):
                raise ConfigurationError(f"penalty {name} is not symmetric")
            if np.any(np.diff(pos) < -1e-9 * max(1.0, np.abs(pos).max())):
                raise ConfigurationError(f"penalty {name} is not increasing on R+")
            if pos.min() < pos[0] - 1e-12:
                raise ConfigurationError(f"penalty {name} is not minimized at 0")

    @classmethod
    def quadratic(cls, g_coef: float, q_coef: float, delta: float, K: int) -> "PenaltySpec":
        if g_coef < 0.0 or q_coef < 0.0:
            raise ConfigurationError("quadratic penalty coefficients must be >= 0")
        return cls(lambda x: g_coef * np.asarray(x, dtype=float) ** 2,
                   lambda x: q_coef * np.asarray(x, dtype=float) ** 2,
                   delta, K, g_coef=g_coef, q_coef=q_coef)

    @classmethod
    def custom(cls, g_fun, q_fun, delta: float, K: int) -> "PenaltySpec":
        return cls(g_fun, q_fun, delta, K)


def eval_penalty(pspec: PenaltySpec, which: str, deviation):
    """Penalty value; deviation may be negative (symmetric functions)."""
    if which == "running":
        return pspec.g_fun(deviation)
    if which == "terminal":
        return pspec.q_fun(deviation)
    raise ValueError(f"which must be 'running' or 'terminal', got {which!r}")
