"""Command-line front end.

Heavy imports happen inside the handlers so that STAKEOPT_THREADS can pin
the BLAS/OpenMP pool sizes before anything numerical is loaded.

Exit codes: 0 success, 2 when a classifier refuses to claim optimality
(unverified condition, possible early exit, violated assumption or an
unproven price window), 1 for configuration and runtime errors.
"""

from __future__ import annotations

import argparse
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _apply_thread_env() -> None:
    n = os.environ.get("STAKEOPT_THREADS")
    if not n:
        return
    if not n.isdigit() or int(n) < 1:
        raise SystemExit(f"error: STAKEOPT_THREADS must be a positive "
                         f"integer, got {n!r}")
    for var in _THREAD_VARS:
        os.environ.setdefault(var, n)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scenario file")
    common.add_argument("--out", help="output directory for JSON/CSV artifacts")
    common.add_argument("--seed", type=int, help="seed for stochastic paths")
    common.add_argument("--step", type=float, help="simulation step size")
    common.add_argument("--alpha", type=float, help="reward exponent")
    common.add_argument("--initial-supply", type=float, dest="initial_supply")
    common.add_argument("--horizon", type=float, help="terminal time")
    common.add_argument("--schedule-file", dest="schedule_file",
                        help="CSV t,N supply table instead of a polynomial")
    common.add_argument("--beta", type=float, help="utility discount rate")
    common.add_argument("--r", type=float, help="bank interest rate")
    common.add_argument("--nu-bar", type=float, dest="nu_bar",
                        help="maximum trading rate")
    common.add_argument("--x", type=float, help="initial stake")
    common.add_argument("--utility", help="linear:l,h or power:p,l,h")
    common.add_argument("--price", help="const:p0, gbm:p0,mu,sigma or file:PATH")
    common.add_argument("--penalty", help="quad:g,q,delta,K")

    p = argparse.ArgumentParser(
        prog="stakeopt",
        description="optimal stake trading: closed forms, dynamic "
                    "programming grids and strategy evaluation")
    p.add_argument("--version", action="version", version="%(prog)s 0.1.0")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("hoard", parents=[common],
                   help="optimal strategy when the discounted price is zero")
    sp = sub.add_parser("classify", parents=[common],
                        help="closed-form classification of the optimum")
    sp.add_argument("--method", choices=("auto", "linear", "gbm", "convex"),
                    default="auto")
    sub.add_parser("parity", parents=[common],
                   help="minimal-cost tracking of the average holding")
    sub.add_parser("phase", parents=[common],
                   help="does full-capacity buying ever reach a monopoly")
    sp = sub.add_parser("hjb", parents=[common],
                        help="finite-difference value function")
    sp.add_argument("--variant", choices=("Hoarding", "Trading", "RiskControl"),
                    default="Trading")
    sp.add_argument("--nt", type=int, default=512)
    sp.add_argument("--ny", type=int, default=512)
    sp.add_argument("--save-grid", action="store_true", dest="save_grid")
    sp = sub.add_parser("evaluate", parents=[common],
                        help="score a given strategy")
    sp.add_argument("--strategy", help="const:v or piecewise:t1,../v0,v1,..")
    sp.add_argument("--mc-paths", type=int, dest="mc_paths", default=0,
                    help="Monte Carlo paths for the full objective (GBM only)")
    sp = sub.add_parser("oracle", parents=[common],
                        help="brute-force search over piecewise strategies")
    sp.add_argument("--m-intervals", type=int, dest="m_intervals", default=8)
    sp.add_argument("--levels", type=int, default=3)
    sub.add_parser("figures", parents=[common],
                   help="emit the showcase data series, plots and manifest")
    return p


def _scenario_from_args(args) -> "object":
    from . import config
    from .errors import ConfigurationError

    if args.config:
        cfg = config.load_scenario(args.config)
        problem_dict = dict(cfg.problem_dict)
        run = cfg.run
    else:
        problem_dict = {}
        run = config.RunSettings()
    run.command = args.command

    sched = dict(problem_dict.get("schedule", {}))
    if args.schedule_file:
        sched = {"type": "tabulated", "file": args.schedule_file}
    for key in ("alpha", "initial_supply", "horizon"):
        if getattr(args, key) is not None:
            sched.setdefault("type", "polynomial")
            sched[key] = getattr(args, key)
    if sched:
        problem_dict["schedule"] = sched
    for key in ("beta", "r", "nu_bar", "x"):
        if getattr(args, key) is not None:
            problem_dict[key] = getattr(args, key)
    for key, parser in (("utility", _utility_dict), ("price", _price_dict),
                        ("penalty", _penalty_dict)):
        flag = getattr(args, key)
        if flag is not None:
            if flag == "none":
                problem_dict.pop(key, None)
            else:
                problem_dict[key] = parser(flag)

    for key in ("seed", "step", "out"):
        if getattr(args, key) is not None:
            setattr(run, key, getattr(args, key))
    for key in ("method", "variant", "nt", "ny", "save_grid", "strategy",
                "mc_paths", "m_intervals", "levels"):
        if hasattr(args, key) and getattr(args, key) is not None:
            setattr(run, key, getattr(args, key))

    if args.command == "figures":
        return config.ScenarioConfig(problem=None, run=run)
    if args.command == "phase":
        problem_dict.setdefault("beta", 0.0)
    if not problem_dict:
        raise ConfigurationError(
            "no problem given: pass --config or problem flags")
    problem, normalized = config.problem_from_dict(problem_dict)
    return config.ScenarioConfig(problem=problem, run=run,
                                 problem_dict=normalized)


def _utility_dict(text):
    from . import config
    return config.parse_utility_flag(text)[1]


def _price_dict(text):
    from . import config
    from .errors import ConfigurationError
    kind, _, rest = text.partition(":")
    if kind == "const":
        return {"type": "constant", "p0": _one_float(rest, "--price const")}
    if kind == "gbm":
        p0, mu, sigma = (float(v) for v in rest.split(","))
        return {"type": "gbm", "p0": p0, "mu": mu, "sigma": sigma}
    if kind == "file":
        return {"type": "file", "path": os.path.abspath(rest)}
    raise ConfigurationError(f"--price must be const:, gbm: or file:, got {text!r}")


def _penalty_dict(text):
    from . import config
    return config.parse_penalty_flag(text)[1]


def _one_float(text, what):
    from .errors import ConfigurationError
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"{what}: expected a number, got {text!r}") from None


# ---------------------------------------------------------------------------
# command execution
# ---------------------------------------------------------------------------

def run(cfg) -> tuple:
    """Execute one scenario; returns (exit_code, summary dict).

    The summary always echoes the scenario so it can be re-parsed and
    re-validated; numeric output is pinned to 17 significant digits.
    """
    from . import report
    from .errors import REFUSAL_ERRORS

    summary = {"command": cfg.run.command, "scenario": cfg.describe()}
    out_dir = cfg.run.out
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    try:
        summary["result"] = _dispatch(cfg, out_dir, summary)
        code = 0
    except REFUSAL_ERRORS as exc:
        summary["result"] = report.refusal_to_dict(exc)
        code = 2
    text = report.render_json(summary)
    print(text)
    if out_dir:
        with open(os.path.join(out_dir, "summary.json"), "w",
                  encoding="utf-8") as fh:
            fh.write(text + "\n")
    return code, summary


def _dispatch(cfg, out_dir, summary):
    from . import dynamics, hjb, objective, report, strategies
    from .config import parse_strategy_flag
    from .errors import ConfigurationError

    command = cfg.run.command
    problem = cfg.problem

    if command == "figures":
        outdir = out_dir or "figures"
        manifest = reproduce_figures(outdir)
        return {"outdir": os.path.abspath(outdir),
                "figures": [f["name"] for f in manifest["figures"]]}

    if command == "phase":
        sched = problem.sched
        if sched.kind != "polynomial":
            raise ConfigurationError("phase needs a polynomial schedule")
        outcome = strategies.monopoly_phase(sched.alpha, sched.initial_supply,
                                            problem.x, problem.nu_bar)
        result = {"tag": outcome.tag}
        if outcome.limit_share is not None:
            result["limit_share"] = outcome.limit_share
        return result

    if command == "hoard":
        res = strategies.solve_hoarding(problem)
        _write_classification_artifacts(problem, res, out_dir, cfg, summary)
        return report.classification_to_dict(res)

    if command == "classify":
        res = _classify(problem, cfg.run.method)
        _write_classification_artifacts(problem, res, out_dir, cfg, summary)
        return report.classification_to_dict(res)

    if command == "parity":
        res = strategies.solve_stake_parity(problem)
        _write_classification_artifacts(problem, res, out_dir, cfg, summary)
        return report.classification_to_dict(res)

    if command == "hjb":
        grid = hjb.solve(problem, cfg.run.variant, cfg.run.nt, cfg.run.ny)
        result = {"variant": grid.variant, "nt": grid.nt, "ny": grid.ny,
                  "value_at_start": hjb.value_at(grid, 0.0, problem.x)}
        if cfg.run.save_grid:
            if not out_dir:
                raise ConfigurationError("--save-grid needs --out DIR")
            csv_path = os.path.join(out_dir, "grid.csv")
            bin_path = os.path.join(out_dir, "grid.bin")
            hjb.to_csv(grid, csv_path)
            hjb.to_binary(grid, bin_path)
            summary.setdefault("artifacts", []).extend(
                [os.path.abspath(csv_path), os.path.abspath(bin_path)])
        return result

    if command == "evaluate":
        if not cfg.run.strategy:
            raise ConfigurationError("evaluate needs --strategy")
        strat = parse_strategy_flag(cfg.run.strategy)
        if cfg.run.mc_paths > 0:
            rep = objective.evaluate_full_monte_carlo(
                problem, strat, n_paths=cfg.run.mc_paths, seed=cfg.run.seed,
                step=cfg.run.step)
        else:
            traj = dynamics.simulate(problem, strat, cfg.run.step)
            rep = objective.ObjectiveReport(
                j2=objective.evaluate_j2(problem, strat, cfg.run.step),
                exit_time=traj.exit_time, exit_kind=traj.exit_kind)
        result = report.objective_to_dict(rep)
        if problem.penalty is not None:
            result["parity_cost"] = objective.evaluate_parity_cost(
                problem, strat, cfg.run.step)
        return result

    if command == "oracle":
        strat, value = objective.brute_force_best(
            problem, cfg.run.m_intervals, cfg.run.levels)
        return {"value": value, "switch_times": list(strat.switch_times),
                "levels": list(strat.levels),
                "m_intervals": cfg.run.m_intervals,
                "levels_per_interval": cfg.run.levels}

    raise ConfigurationError(f"unknown command {command!r}")


def _classify(problem, method: str):
    from . import price as price_mod, strategies
    from .errors import ConfigurationError

    if method == "linear":
        return strategies.classify_linear(problem)
    if method == "gbm":
        return strategies.classify_gbm_polynomial(problem)
    if method == "convex":
        return strategies.classify_convex(problem)
    if problem.util is not None and problem.util.is_convex \
            and not problem.util.is_linear:
        return strategies.classify_convex(problem)
    pm = problem.price
    if pm is not None and pm.variant == price_mod.GBM \
            and problem.beta > pm.mu and problem.sched.kind == "polynomial":
        return strategies.classify_gbm_polynomial(problem)
    return strategies.classify_linear(problem)


def _write_classification_artifacts(problem, res, out_dir, cfg, summary):
    from . import dynamics, report

    if not out_dir:
        return
    traj = dynamics.simulate(problem, res.strategy, cfg.run.step)
    traj_path = os.path.join(out_dir, "trajectory.csv")
    report.write_trajectory_csv(traj, traj_path)
    paths = [os.path.abspath(traj_path)]
    if problem.util is not None and problem.util.is_linear \
            and problem.price is not None:
        psi_path = os.path.join(out_dir, "psi_price.csv")
        report.write_psi_curve_csv(problem, psi_path,
                                   markers=res.switch_times)
        paths.append(os.path.abspath(psi_path))
    summary.setdefault("artifacts", []).extend(paths)


def reproduce_figures(outdir: str) -> dict:
    """Write the showcase CSV series, their PNG renders and manifest.json."""
    from . import report
    return report.build_figures(outdir)


def main(argv=None) -> int:
    _apply_thread_env()
    args = _build_parser().parse_args(argv)
    from .errors import REFUSAL_ERRORS, StakeoptError

    try:
        cfg = _scenario_from_args(args)
        code, _ = run(cfg)
        return code
    except REFUSAL_ERRORS as exc:
        from . import report
        print(report.render_json({"command": args.command,
                                  "result": report.refusal_to_dict(exc)}))
        return 2
    except (StakeoptError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
