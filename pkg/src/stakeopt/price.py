"""Stake price models and the discounted expected price curve.

Trading decisions compare the marginal stake value against the discounted
expected price, so that curve is the only thing most of the library reads.
The Constant variant therefore stores the discounted curve directly, which
avoids double-discounting bugs.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import ConfigurationError

CONSTANT = "constant"
GBM = "gbm"
TABULATED = "tabulated"


class PriceModel:
    def __init__(self, variant, p0=None, mu=None, sigma=None,
                 knots=None, beta=None):
        self.variant = variant
        self.p0 = p0
        self.mu = mu
        self.sigma = sigma
        self.knots = knots
        self.beta = beta

    @classmethod
    def constant(cls, p0: float) -> "PriceModel":
        """Constant discounted curve: the risk-neutral case."""
        if p0 <= 0.0:
            raise ConfigurationError("constant discounted price must be > 0")
        return cls(CONSTANT, p0=float(p0))

    @classmethod
    def gbm(cls, p0: float, mu: float, sigma: float) -> "PriceModel":
        """Geometric Brownian motion dP/P = mu dt + sigma dB."""
        if p0 <= 0.0:
            raise ConfigurationError("initial price must be > 0")
        if sigma < 0.0:
            raise ConfigurationError("volatility must be >= 0")
        return cls(GBM, p0=float(p0), mu=float(mu), sigma=float(sigma))

    @classmethod
    def tabulated_discounted(cls, knots, beta: float) -> "PriceModel":
        """Discounted curve given at knots, linear in between; beta baked in."""
        knots = [(float(t), float(p)) for t, p in knots]
        if len(knots) < 2:
            raise ConfigurationError("tabulated price needs >= 2 knots")
        for i in range(1, len(knots)):
            if knots[i][0] <= knots[i - 1][0]:
                raise ConfigurationError("price knot times must be increasing")
        if any(p <= 0.0 for _, p in knots):
            raise ConfigurationError("discounted price must stay positive")
        return cls(TABULATED, knots=knots, beta=float(beta))

    @classmethod
    def from_csv(cls, path, beta: float) -> "PriceModel":
        """Read knots from CSV with header ``t,p_tilde``."""
        knots = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:2]] != ["t", "p_tilde"]:
                raise ConfigurationError(f"{path}:1: expected header 't,p_tilde'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    knots.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    raise ConfigurationError(
                        f"{path}:{lineno}: cannot parse '{','.join(row)}'")
        return cls.tabulated_discounted(knots, beta)

    def __repr__(self):
        if self.variant == CONSTANT:
            return f"PriceModel.constant({self.p0})"
        if self.variant == GBM:
            return f"PriceModel.gbm({self.p0}, mu={self.mu}, sigma={self.sigma})"
        return f"PriceModel.tabulated({len(self.knots)} knots, beta={self.beta})"


def discounted_mean_price(model: PriceModel, beta: float, t):
    """Discounted expected price at time t.  Accepts scalars or arrays."""
    if beta < 0.0:
        raise ValueError("beta must be >= 0")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    if model.variant == CONSTANT:
        out = np.full_like(t, model.p0, dtype=float)
    elif model.variant == GBM:
        out = model.p0 * np.exp(-(beta - model.mu) * t)
    else:
        if model.beta != beta:
            raise ConfigurationError(
                f"tabulated curve was built for beta={model.beta}, queried "
                f"with beta={beta}")
        ts = np.array([k[0] for k in model.knots])
        ps = np.array([k[1] for k in model.knots])
        out = np.interp(t, ts, ps)
    return float(out) if scalar else out


def monotonicity(model: PriceModel, beta: float) -> str:
    """'increasing', 'constant', 'decreasing' or 'mixed' for the curve."""
    if model.variant == CONSTANT:
        return "constant"
    if model.variant == GBM:
        if beta == model.mu:
            return "constant"
        return "decreasing" if beta > model.mu else "increasing"
    ps = np.array([k[1] for k in model.knots])
    d = np.diff(ps)
    tol = 1e-12 * max(1.0, float(np.abs(ps).max()))
    if np.all(np.abs(d) <= tol):
        return "constant"
    if np.all(d >= -tol):
        return "increasing"
    if np.all(d <= tol):
        return "decreasing"
    return "mixed"


def sample_price_path(model: PriceModel, seed: int, grid) -> np.ndarray:
    """Sample one GBM path on the grid by exact log increments."""
    if model.variant != GBM:
        raise ConfigurationError("path sampling is defined for the GBM variant")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or grid[0] != 0.0:
        raise ValueError("grid must be 1-d, start at 0")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be strictly increasing")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return _sample_paths_with(rng, model, grid, 1)[0]


def sample_price_paths_chunk(model: PriceModel, seed: int, chunk_index: int,
                             grid, n_paths: int) -> np.ndarray:
    """Sample a (n_paths, len(grid)) block on an independent substream.

    Substreams are derived from (seed, chunk_index) only, so parallel or
    chunked Monte Carlo reproduces bit-identically regardless of scheduling.
    """
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,))))
    return _sample_paths_with(rng, model, np.asarray(grid, dtype=float), n_paths)


def _sample_paths_with(rng, model, grid, n_paths):
    dt = np.diff(grid)
    drift = (model.mu - 0.5 * model.sigma ** 2) * dt
    vol = model.sigma * np.sqrt(dt)
    z = rng.standard_normal((n_paths, dt.size))
    logp = np.cumsum(drift + vol * z, axis=1)
    out = np.empty((n_paths, grid.size))
    out[:, 0] = model.p0
    out[:, 1:] = model.p0 * np.exp(logp)
    return out


def lipschitz_estimate(model: PriceModel, beta: float, grid) -> float:
    """Max slope of the discounted curve over consecutive grid points."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise ValueError("grid needs at least 2 points")
    vals = discounted_mean_price(model, beta, grid)
    return float(np.max(np.abs(np.diff(vals) / np.diff(grid))))
