"""Machine-readable output: deterministic JSON, CSV series, figure data.

JSON floats are pinned to 17 significant digits so identical runs emit
byte-identical summaries; the renderer is hand-rolled because the stdlib
encoder does not expose float formatting.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import dynamics, reward
from .errors import ConfigurationError


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(float(x), ".17g")


def render_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
        return f'"{out}"'
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [render_json(v, indent + 1) for v in obj]
        if not items:
            return "[]"
        return "[\n" + ",\n".join(inner + s for s in items) + f"\n{pad}]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f'{inner}{render_json(str(k))}: {render_json(v, indent + 1)}'
                for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    raise ConfigurationError(f"cannot serialize {type(obj).__name__} to JSON")


def write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_json(obj) + "\n")


def classification_to_dict(result) -> dict:
    out = {"tag": result.tag,
           "value": result.value,
           "exit_time": result.exit_time,
           "switch_times": list(result.switch_times)}
    if result.first_action is not None:
        out["first_action"] = result.first_action
    if result.switch_times:
        out["t0"] = result.switch_times[0]
    if result.diagnostics:
        out["diagnostics"] = dict(result.diagnostics)
    return out


def objective_to_dict(report) -> dict:
    return {"j2": report.j2, "j1": report.j1, "mc_mean": report.mc_mean,
            "mc_halfwidth": report.mc_halfwidth,
            "exit_time": report.exit_time, "exit_kind": report.exit_kind}


def refusal_to_dict(exc) -> dict:
    out = {"refusal": type(exc).__name__, "message": str(exc)}
    failing = getattr(exc, "failing_time", None)
    if failing is not None:
        out["failing_time"] = failing
    diagnostics = getattr(exc, "diagnostics", None)
    if diagnostics:
        out["diagnostics"] = dict(diagnostics)
    return out


# ---------------------------------------------------------------------------
# CSV series
# ---------------------------------------------------------------------------

def _write_csv(path: str, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format(float(v), ".17g") if isinstance(v, (float, np.floating))
                              else str(v) for v in row) + "\n")


def write_trajectory_csv(traj: dynamics.StateTrajectory, path: str) -> None:
    rows = zip(traj.times, traj.states, traj.supply, traj.shares)
    _write_csv(path, "t,X,N,share", rows)


def write_price_curve_csv(problem, path: str, points: int = 513) -> None:
    ts = np.linspace(0.0, problem.horizon, points)
    ps = np.broadcast_to(np.asarray(problem.discounted_price(ts), dtype=float),
                         ts.shape)
    _write_csv(path, "t,p_tilde", zip(ts, ps))


def write_psi_curve_csv(problem, path: str, points: int = 513,
                        markers=()) -> None:
    """Columns t, psi, p_tilde, marker; marker=1 rows are switch times."""
    from . import strategies
    ts = list(np.linspace(0.0, problem.horizon, points))
    flags = [0] * len(ts)
    for m in markers:
        ts.append(float(m))
        flags.append(1)
    order = np.argsort(ts, kind="stable")
    ts = [ts[i] for i in order]
    flags = [flags[i] for i in order]
    psis = strategies.psi(problem, np.asarray(ts))
    prices = np.broadcast_to(
        np.asarray(problem.discounted_price(np.asarray(ts)), dtype=float),
        (len(ts),))
    _write_csv(path, "t,psi,p_tilde,marker", zip(ts, psis, prices, flags))


# ---------------------------------------------------------------------------
# figure bundle
# ---------------------------------------------------------------------------

def _plot(path, series, title, xlabel, ylabel, vlines=(), hlines=()):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    for xs, ys, label, style in series:
        ax.plot(xs, ys, style, label=label)
    for v, label in vlines:
        ax.axvline(v, color="gray", linestyle=":", linewidth=1)
        ax.annotate(label, (v, ax.get_ylim()[0]), fontsize=8,
                    textcoords="offset points", xytext=(3, 6))
    for h, label in hlines:
        ax.axhline(h, color="gray", linestyle="--", linewidth=1)
        ax.annotate(label, (ax.get_xlim()[0], h), fontsize=8,
                    textcoords="offset points", xytext=(6, 3))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if any(s[2] for s in series):
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def build_figures(outdir: str) -> dict:
    """Emit the data series behind the four showcase plots.

    Each figure gets its CSV series, a rendered PNG alongside, and an entry
    in the returned manifest (also written as manifest.json).
    """
    from . import strategies
    from .problem import TradingProblem
    from .utility import PenaltySpec, UtilitySpec

    os.makedirs(outdir, exist_ok=True)
    manifest = {"figures": []}

    # concentration and monopoly: share growth below and above the threshold
    sched = reward.RewardSchedule.polynomial(2.0, 100.0, 200.0)
    entries = []
    series = []
    for nu_bar, name in ((2.0, "below_threshold"), (6.0, "above_threshold")):
        prob = TradingProblem(sched=sched, beta=0.1, nu_bar=nu_bar, x=50.0)
        traj = dynamics.simulate(prob, dynamics.Strategy.constant(nu_bar),
                                 step=0.05)
        csv_path = os.path.join(outdir, f"hoarding_{name}.csv")
        write_trajectory_csv(traj, csv_path)
        entries.append({"csv": os.path.basename(csv_path),
                        "exit_time": traj.exit_time,
                        "exit_kind": traj.exit_kind})
        series.append((traj.times, traj.shares, f"nu_bar={nu_bar}", "-"))
    png = os.path.join(outdir, "hoarding_share.png")
    phase = strategies.monopoly_phase(2.0, 100.0, 50.0, 2.0)
    _plot(png, series, "Buying at capacity: share of total supply",
          "t", "X/N", hlines=[(phase.limit_share, "limit share")])
    manifest["figures"].append({
        "name": "hoarding_share",
        "description": "stake share under full-capacity buying, below and "
                       "above the monopoly threshold rate",
        "png": os.path.basename(png), "series": entries})

    # linear utility, constant price: marginal value against three prices
    sched1 = reward.RewardSchedule.polynomial(1.0, 100.0, 10.0)
    entries = []
    for p0, name in ((0.3, "buy_all"), (0.42, "buy_then_sell"),
                     (0.6, "sell_all")):
        from .price import PriceModel
        prob = TradingProblem(sched=sched1,
                              util=UtilitySpec.linear(0.01, 1.0),
                              price=PriceModel.constant(p0), beta=0.1,
                              nu_bar=1.0, x=50.0)
        outcome = strategies.classify_linear(prob)
        csv_path = os.path.join(outdir, f"linear_{name}.csv")
        write_psi_curve_csv(prob, csv_path, markers=outcome.switch_times)
        entries.append({"csv": os.path.basename(csv_path), "price": p0,
                        "tag": outcome.tag,
                        "switch_times": list(outcome.switch_times)})
    ts = np.linspace(0.0, 10.0, 513)
    prob_mid = TradingProblem(sched=sched1, util=UtilitySpec.linear(0.01, 1.0),
                              beta=0.1, nu_bar=1.0, x=50.0)
    psis = strategies.psi(prob_mid, ts)
    png = os.path.join(outdir, "linear_classification.png")
    _plot(png, [(ts, psis, "marginal stake value", "-")],
          "Linear utility: marginal value vs constant prices", "t", "value",
          hlines=[(0.3, "p=0.3"), (0.42, "p=0.42"), (0.6, "p=0.6")],
          vlines=[(entries[1]["switch_times"][0], "switch")])
    manifest["figures"].append({
        "name": "linear_classification",
        "description": "marginal stake value crossing constant discounted "
                       "prices; crossing times are the optimal switches",
        "png": os.path.basename(png), "series": entries})

    # GBM price: decreasing discounted curve and the switch point
    from .price import PriceModel
    prob_gbm = TradingProblem(sched=sched1,
                              util=UtilitySpec.linear(0.01, 1.0),
                              price=PriceModel.gbm(0.55, 0.05, 0.2),
                              beta=0.1, nu_bar=1.0, x=50.0)
    outcome = strategies.classify_gbm_polynomial(prob_gbm)
    csv_path = os.path.join(outdir, "gbm_curves.csv")
    write_psi_curve_csv(prob_gbm, csv_path, markers=outcome.switch_times)
    png = os.path.join(outdir, "gbm_classification.png")
    prices = np.asarray(prob_gbm.discounted_price(ts), dtype=float)
    _plot(png, [(ts, strategies.psi(prob_gbm, ts), "marginal stake value", "-"),
                (ts, prices, "discounted price", "--")],
          "GBM price: discounted curves and the optimal switch", "t", "value",
          vlines=[(t, "switch") for t in outcome.switch_times])
    manifest["figures"].append({
        "name": "gbm_classification",
        "description": "discounted mean price against the marginal stake "
                       "value for a risk-averse participant",
        "png": os.path.basename(png),
        "series": [{"csv": os.path.basename(csv_path), "tag": outcome.tag,
                    "switch_times": list(outcome.switch_times)}]})

    # stake parity: trade to the average holding, then track it
    sched_par = reward.RewardSchedule.polynomial(1.0, 100.0, 20.0)
    prob_par = TradingProblem(sched=sched_par, beta=0.0, nu_bar=1.0, x=60.0,
                              penalty=PenaltySpec.quadratic(1.0, 1.0, 0.1, 2))
    outcome = strategies.solve_stake_parity(prob_par)
    traj = dynamics.simulate(prob_par, outcome.strategy, step=0.01)
    csv_path = os.path.join(outdir, "parity_trajectory.csv")
    target = traj.supply / 2.0
    _write_csv(csv_path, "t,X,target,share",
               zip(traj.times, traj.states, target, traj.shares))
    png = os.path.join(outdir, "parity_tracking.png")
    _plot(png, [(traj.times, traj.states, "stake", "-"),
                (traj.times, target, "average holding", "--")],
          "Stake parity: selling down to the average holding", "t", "stakes",
          vlines=[(t, "hold from here") for t in outcome.switch_times])
    manifest["figures"].append({
        "name": "parity_tracking",
        "description": "optimal tracking of the average holding: full-rate "
                       "trade until parity, then hold",
        "png": os.path.basename(png),
        "series": [{"csv": os.path.basename(csv_path), "tag": outcome.tag,
                    "cost": outcome.value,
                    "switch_times": list(outcome.switch_times)}]})

    write_json(manifest, os.path.join(outdir, "manifest.json"))
    return manifest
