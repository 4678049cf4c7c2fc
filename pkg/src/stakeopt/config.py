"""Scenario configuration: YAML files and compact CLI flag grammars.

A scenario is a problem block (schedule, utility, price, penalty, scalars)
plus a run block (command and numerical settings).  Everything the CLI can
do is also reachable programmatically through ScenarioConfig.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from . import price as price_mod, reward, utility
from .errors import ConfigurationError
from .problem import TradingProblem

COMMANDS = ("hoard", "classify", "parity", "phase", "hjb", "evaluate",
            "oracle", "figures")


@dataclass
class RunSettings:
    command: str = "classify"
    nt: int = 512
    ny: int = 512
    variant: str = "Trading"
    seed: int = 0
    mc_paths: int = 0
    m_intervals: int = 8
    levels: int = 3
    step: float | None = None
    out: str | None = None
    save_grid: bool = False
    strategy: str | None = None
    method: str = "auto"


@dataclass
class ScenarioConfig:
    problem: TradingProblem
    run: RunSettings
    problem_dict: dict = field(default_factory=dict)
    source: str | None = None

    def describe(self) -> dict:
        run = {k: v for k, v in vars(self.run).items() if v is not None}
        return {"problem": self.problem_dict, "run": run}


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigurationError(f"{where}: missing required field '{key}'")
    return block[key]


def _known_keys(block: dict, allowed, where: str):
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigurationError(f"{where}: unknown field(s) {unknown}")


def _floats(text: str, n: int, what: str):
    parts = text.split(",")
    if len(parts) != n:
        raise ConfigurationError(
            f"{what}: expected {n} comma-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigurationError(f"{what}: {exc}") from None


# ---------------------------------------------------------------------------
# flag grammars
# ---------------------------------------------------------------------------

def parse_utility_flag(text: str):
    """'linear:l_coef,h_coef' or 'power:p,l_coef,h_coef'."""
    kind, _, rest = text.partition(":")
    if kind == "linear":
        l, h = _floats(rest, 2, "--utility linear")
        return utility.UtilitySpec.linear(l, h), \
            {"type": "linear", "l_coef": l, "h_coef": h}
    if kind == "power":
        p, l, h = _floats(rest, 3, "--utility power")
        return utility.UtilitySpec.power(p, l, h), \
            {"type": "power", "power": p, "l_coef": l, "h_coef": h}
    raise ConfigurationError(
        f"--utility must be linear:... or power:..., got {text!r}")


def parse_price_flag(text: str, beta: float, base_dir: str = "."):
    """'const:p0', 'gbm:p0,mu,sigma' or 'file:path'."""
    kind, _, rest = text.partition(":")
    if kind == "const":
        (p0,) = _floats(rest, 1, "--price const")
        return price_mod.PriceModel.constant(p0), {"type": "constant", "p0": p0}
    if kind == "gbm":
        p0, mu, sigma = _floats(rest, 3, "--price gbm")
        return price_mod.PriceModel.gbm(p0, mu, sigma), \
            {"type": "gbm", "p0": p0, "mu": mu, "sigma": sigma}
    if kind == "file":
        path = os.path.join(base_dir, rest) if not os.path.isabs(rest) else rest
        return price_mod.PriceModel.from_csv(path, beta), \
            {"type": "file", "path": os.path.abspath(path)}
    raise ConfigurationError(
        f"--price must be const:..., gbm:... or file:..., got {text!r}")


def parse_penalty_flag(text: str):
    """'quad:g_coef,q_coef,delta,K'."""
    kind, _, rest = text.partition(":")
    if kind != "quad":
        raise ConfigurationError(f"--penalty must be quad:..., got {text!r}")
    g, q, delta, k = _floats(rest, 4, "--penalty quad")
    return utility.PenaltySpec.quadratic(g, q, delta, int(k)), \
        {"type": "quadratic", "g_coef": g, "q_coef": q,
         "delta": delta, "K": int(k)}


def parse_strategy_flag(text: str):
    """'const:level' or 'piecewise:t1,t2,.../v0,v1,...'."""
    from . import dynamics
    kind, _, rest = text.partition(":")
    if kind == "const":
        (level,) = _floats(rest, 1, "--strategy const")
        return dynamics.Strategy.constant(level)
    if kind == "piecewise":
        times_txt, _, levels_txt = rest.partition("/")
        times = ([float(p) for p in times_txt.split(",")]
                 if times_txt else [])
        try:
            levels = [float(p) for p in levels_txt.split(",")]
        except ValueError as exc:
            raise ConfigurationError(f"--strategy: {exc}") from None
        return dynamics.Strategy.piecewise_constant(times, levels)
    raise ConfigurationError(
        f"--strategy must be const:... or piecewise:..., got {text!r}")


# ---------------------------------------------------------------------------
# dict -> objects
# ---------------------------------------------------------------------------

def _build_schedule(block: dict, base_dir: str, where: str):
    _known_keys(block, ("type", "alpha", "initial_supply", "horizon", "file"),
                where)
    kind = _require(block, "type", where)
    if kind == "polynomial":
        sched = reward.RewardSchedule.polynomial(
            float(_require(block, "alpha", where)),
            float(_require(block, "initial_supply", where)),
            float(_require(block, "horizon", where)))
        return sched, {"type": "polynomial", "alpha": sched.alpha,
                       "initial_supply": sched.initial_supply,
                       "horizon": sched.horizon}
    if kind == "tabulated":
        path = _require(block, "file", where)
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigurationError(f"{where}: schedule file {path} does not exist")
        sched = reward.RewardSchedule.from_csv(path)
        return sched, {"type": "tabulated", "file": os.path.abspath(path)}
    raise ConfigurationError(f"{where}: unknown schedule type {kind!r}")


def _build_utility(block, where: str):
    if block is None:
        return None, None
    _known_keys(block, ("type", "l_coef", "h_coef", "power", "rate"), where)
    kind = _require(block, "type", where)
    l = float(block.get("l_coef", 0.0))
    h = float(block.get("h_coef", 0.0))
    if kind == "linear":
        return utility.UtilitySpec.linear(l, h), \
            {"type": "linear", "l_coef": l, "h_coef": h}
    if kind == "power":
        p = float(_require(block, "power", where))
        return utility.UtilitySpec.power(p, l, h), \
            {"type": "power", "power": p, "l_coef": l, "h_coef": h}
    if kind == "exponential":
        rate = float(_require(block, "rate", where))
        return utility.UtilitySpec.exponential(rate, l, h), \
            {"type": "exponential", "rate": rate, "l_coef": l, "h_coef": h}
    raise ConfigurationError(f"{where}: unknown utility type {kind!r}")


def _build_price(block, beta: float, base_dir: str, where: str):
    if block is None:
        return None, None
    _known_keys(block, ("type", "p0", "mu", "sigma", "file", "path"), where)
    kind = _require(block, "type", where)
    if kind == "constant":
        p0 = float(_require(block, "p0", where))
        return price_mod.PriceModel.constant(p0), {"type": "constant", "p0": p0}
    if kind == "gbm":
        p0 = float(_require(block, "p0", where))
        mu = float(_require(block, "mu", where))
        sigma = float(_require(block, "sigma", where))
        return price_mod.PriceModel.gbm(p0, mu, sigma), \
            {"type": "gbm", "p0": p0, "mu": mu, "sigma": sigma}
    if kind == "file":
        path = block.get("file") or _require(block, "path", where)
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigurationError(f"{where}: price file {path} does not exist")
        return price_mod.PriceModel.from_csv(path, beta), \
            {"type": "file", "path": os.path.abspath(path)}
    raise ConfigurationError(f"{where}: unknown price type {kind!r}")


def _build_penalty(block, where: str):
    if block is None:
        return None, None
    _known_keys(block, ("type", "g_coef", "q_coef", "delta", "K"), where)
    kind = _require(block, "type", where)
    if kind != "quadratic":
        raise ConfigurationError(f"{where}: unknown penalty type {kind!r}")
    g = float(_require(block, "g_coef", where))
    q = float(_require(block, "q_coef", where))
    delta = float(_require(block, "delta", where))
    k = int(_require(block, "K", where))
    return utility.PenaltySpec.quadratic(g, q, delta, k), \
        {"type": "quadratic", "g_coef": g, "q_coef": q, "delta": delta, "K": k}


def problem_from_dict(block: dict, base_dir: str = ".",
                      where: str = "problem") -> tuple[TradingProblem, dict]:
    _known_keys(block, ("schedule", "utility", "price", "penalty",
                        "beta", "r", "nu_bar", "x"), where)
    sched, sched_d = _build_schedule(_require(block, "schedule", where),
                                     base_dir, f"{where}.schedule")
    beta = float(_require(block, "beta", where))
    r = float(block.get("r", 0.0))
    if beta < r:
        raise ConfigurationError(
            f"{where}: beta={beta} must be at least r={r}")
    nu_bar = float(_require(block, "nu_bar", where))
    x = float(_require(block, "x", where))
    util, util_d = _build_utility(block.get("utility"), f"{where}.utility")
    price, price_d = _build_price(block.get("price"), beta, base_dir,
                                  f"{where}.price")
    pen, pen_d = _build_penalty(block.get("penalty"), f"{where}.penalty")
    problem = TradingProblem(sched=sched, util=util, price=price, beta=beta,
                             r=r, nu_bar=nu_bar, x=x, penalty=pen)
    normalized = {"schedule": sched_d, "beta": beta, "r": r,
                  "nu_bar": nu_bar, "x": x}
    if util_d:
        normalized["utility"] = util_d
    if price_d:
        normalized["price"] = price_d
    if pen_d:
        normalized["penalty"] = pen_d
    return problem, normalized


def run_from_dict(block: dict, where: str = "run") -> RunSettings:
    if block is None:
        block = {}
    allowed = set(vars(RunSettings()))
    _known_keys(block, allowed, where)
    run = RunSettings(**{k: v for k, v in block.items()})
    if run.command not in COMMANDS:
        raise ConfigurationError(
            f"{where}.command must be one of {COMMANDS}, got {run.command!r}")
    if run.variant not in ("Hoarding", "Trading", "RiskControl"):
        raise ConfigurationError(
            f"{where}.variant must be Hoarding, Trading or RiskControl")
    return run


def load_scenario(path: str) -> ScenarioConfig:
    """Parse a YAML scenario file into a validated ScenarioConfig."""
    if not os.path.exists(path):
        raise ConfigurationError(f"config file {path} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    _known_keys(raw, ("problem", "run"), path)
    base_dir = os.path.dirname(os.path.abspath(path))
    problem, normalized = problem_from_dict(
        _require(raw, "problem", path), base_dir, f"{path}: problem")
    run = run_from_dict(raw.get("run"), f"{path}: run")
    return ScenarioConfig(problem=problem, run=run, problem_dict=normalized,
                          source=os.path.abspath(path))


def scenario_from_dict(raw: dict, base_dir: str = ".") -> ScenarioConfig:
    """Rebuild a scenario from a JSON-summary echo (round-trip support)."""
    problem, normalized = problem_from_dict(raw["problem"], base_dir)
    run = run_from_dict(raw.get("run"))
    return ScenarioConfig(problem=problem, run=run, problem_dict=normalized)
