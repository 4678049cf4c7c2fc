"""Problem container shared by every solver."""

from __future__ import annotations

import numpy as np

from . import price as price_mod
from . import reward
from .errors import ConfigurationError


class TradingProblem:
    """One participant's instance: schedule, utilities, price, rates, bounds.

    ``price=None`` means the discounted price curve is identically zero,
    which is the pure hoarding setting (selling earns nothing, so only the
    utility terms matter).  ``util=None`` is allowed for the pure parity
    problem, which has no utility terms.
    """

    def __init__(self, sched: reward.RewardSchedule, util=None, price=None,
                 beta: float = 0.0, r: float = 0.0, nu_bar: float = 1.0,
                 x: float = 0.0, penalty=None):
        if beta < 0.0 or r < 0.0:
            raise ConfigurationError("discount and risk-free rates must be >= 0")
        if beta < r:
            # with beta < r the bank account alone makes the objective
            # unbounded, so the reduction to pure stake trading fails
            raise ConfigurationError(
                f"beta >= r is required, got beta={beta}, r={r}")
        if nu_bar <= 0.0:
            raise ConfigurationError("max trade rate nu_bar must be > 0")
        n0 = reward.total_supply(sched, 0.0)
        if not 0.0 <= x <= n0:
            raise ConfigurationError(
                f"initial stakes must lie in [0, {n0}], got {x}")
        self.sched = sched
        self.util = util
        self.price = price
        self.beta = float(beta)
        self.r = float(r)
        self.nu_bar = float(nu_bar)
        self.x = float(x)
        self.penalty = penalty

    @property
    def horizon(self) -> float:
        return self.sched.horizon

    @property
    def initial_supply(self) -> float:
        return float(reward.total_supply(self.sched, 0.0))

    def discounted_price(self, t):
        """The discounted expected price curve; zero when no price model."""
        if self.price is None:
            t = np.asarray(t, dtype=float)
            return 0.0 if t.ndim == 0 else np.zeros_like(t)
        return price_mod.discounted_mean_price(self.price, self.beta, t)

    def capacity_margin(self) -> tuple[float, float]:
        """(nu_bar * integral_0^T dt/N, min(x/N0, 1 - x/N0)).

        Trading stays inside the open band whenever the first number is at
        most the second, for any strategy bounded by nu_bar.
        """
        budget = self.nu_bar * reward.inverse_supply_integral(
            self.sched, 0.0, self.horizon)
        n0 = self.initial_supply
        return budget, min(self.x / n0, 1.0 - self.x / n0)

    def fingerprint(self) -> str:
        parts = [self.sched.fingerprint(), f"beta={self.beta}", f"r={self.r}",
                 f"nu_bar={self.nu_bar}", f"x={self.x}"]
        if self.price is not None:
            parts.append(repr(self.price))
        if self.penalty is not None:
            parts.append(f"penalty(delta={self.penalty.delta}, K={self.penalty.K})")
        return "; ".join(parts)
