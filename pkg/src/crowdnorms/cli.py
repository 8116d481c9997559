"""Command-line entry point: ``crowdnorms <command> [options]``.

Exit status is 0 on success, 2 for configuration errors and 3 when a
numerical routine fails.  Output files go to ``--out-dir``, which defaults
to ``$CROWDNORMS_OUT`` or ``./results``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import config as cfg
from .analytic import ReducibleChainError, incentive_margins
from .charts import ChartError, render_chart
from .design import (
    DEFAULT_K_MAX,
    DEFAULT_TOL,
    InfeasibleError,
    NonBracketingError,
    existence_thresholds,
    optimize_revenue,
    optimize_social_welfare,
)
from .figures import FIGURES, FigureDefaults, write_figure, write_table
from .pricing import optimize_price, price_grid
from .simulate import ConfigError, run_simulation

OUT_ENV = "CROWDNORMS_OUT"
TASKS = ("design-welfare", "design-revenue", "check", "simulate", "price-opt", "thresholds")
SWEEP_AXES = ("r", "delta", "alpha", "p", "lambda", "K", "h")

# axes a task chooses for itself cannot be swept
INCOMPATIBLE = {
    "design-welfare": {"lambda", "K", "h"},
    "design-revenue": {"lambda", "K", "h"},
    "price-opt": {"p", "lambda", "K", "h"},
    "thresholds": {"lambda", "K", "h"},
    "check": set(),
    "simulate": set(),
}

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _floats(text: str) -> list[float]:
    """``a,b,c`` or ``lo:hi:step``."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            lo, hi, step = (float(s) for s in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [round(lo + k * step, 10) for k in range(max(n, 0))]
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use 'a,b,c' or 'lo:hi:step'") from None


def _add_market(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("market")
    g.add_argument("--config", help="key = value file; flags override its entries")
    g.add_argument("--p", type=float)
    g.add_argument("--c", type=float)
    g.add_argument("--r", type=float, help="cost-to-price ratio; sets c = r p")
    g.add_argument("--V", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--K", type=int)
    g.add_argument("--h", type=int)
    g.add_argument("--K-max", dest="K_max", type=int)
    g.add_argument("--out-dir", default=os.environ.get(OUT_ENV, "results"))
    g.add_argument("--out", help="CSV file name inside --out-dir")
    g.add_argument("--chart", action="store_true", help="also draw an SVG chart of each CSV")


def _add_sim(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--seed", type=int)
    g.add_argument("--n-workers", dest="n_workers", type=int)
    g.add_argument("--n-requesters", dest="n_requesters", type=int)
    g.add_argument("--periods", type=int)
    g.add_argument("--burn-in", dest="burn_in", type=int)
    g.add_argument("--worker-policy", dest="worker_policy", choices=("compliant", "best-response", "all-L"))
    g.add_argument("--requester-mode", dest="requester_mode", choices=("passive", "strategic"))
    g.add_argument("--requester-policy", dest="requester_policy", choices=("compliant", "best-response"))
    g.add_argument("--K-req", dest="K_req", type=int)
    g.add_argument("--h-req", dest="h_req", type=int)
    g.add_argument("--delta-req", dest="delta_req", type=float)


def _add_task_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("task options")
    g.add_argument("--p-grid", dest="p_grid", type=_floats, help="prices for price-opt (default 0.05:10:0.05)")
    g.add_argument("--method", choices=("analytic", "simulate"), default="analytic")
    g.add_argument("--axis", dest="threshold_axis", choices=("r", "delta", "alpha"), help="threshold axis")
    g.add_argument("--tol", type=float, default=DEFAULT_TOL)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdnorms", description="Design and simulate reputation-based crowdsourcing protocols.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("design-welfare", "welfare-optimal sustainable norm"),
        ("design-revenue", "revenue-optimal norm and sharing ratio"),
        ("check", "incentive margins of one protocol"),
        ("simulate", "agent-based run"),
        ("price-opt", "welfare-maximizing price with strategic requesters"),
        ("thresholds", "existence boundary along one axis"),
    ):
        p = sub.add_parser(name, help=text)
        _add_market(p)
        _add_sim(p)
        _add_task_options(p)

    p = sub.add_parser("sweep", help="run a task over a grid of one parameter")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--sweep-axis", dest="sweep_axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--grid", required=True, type=_floats)
    _add_market(p)
    _add_sim(p)
    _add_task_options(p)

    p = sub.add_parser("figures", help="regenerate figure tables")
    p.add_argument("figure", choices=(*FIGURES, "all"))
    p.add_argument("--p", type=float, default=5.0)
    p.add_argument("--V", type=float, default=10.0)
    p.add_argument("--delta", type=float, default=0.8)
    p.add_argument("--delta-req", dest="delta_req", type=float, default=0.5)
    p.add_argument("--alpha", type=_floats, default=[0.05])
    p.add_argument("--T", type=int, default=4)
    p.add_argument("--K-max", dest="K_max", type=int, default=DEFAULT_K_MAX)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=os.environ.get(OUT_ENV, "results"))
    p.add_argument("--chart", action="store_true")
    return parser


_FLAG_KEYS = ("p", "c", "r", "V", "delta", "alpha", "K", "h", "K_max", "seed", "n_workers", "n_requesters",
              "periods", "burn_in", "worker_policy", "requester_mode", "requester_policy", "K_req", "h_req", "delta_req")


def _values(args: argparse.Namespace) -> dict[str, Any]:
    base = cfg.load_config(args.config) if args.config else {}
    flags = {k: getattr(args, k) for k in _FLAG_KEYS}
    flags["lambda"] = args.lam
    if args.r is not None:
        base.pop("c", None)
    if args.c is not None:
        base.pop("r", None)
    return cfg.merge(base, flags)


def _k_max(values: dict[str, Any]) -> int:
    k = values.get("K_max", DEFAULT_K_MAX)
    if k < 1:
        raise ConfigError("K_max", "must be at least 1")
    return k


@dataclass
class Outcome:
    row: dict[str, Any]
    summary: str
    detail: Any = None  # SimResult or PriceCurve for commands that write more than one row


def evaluate(task: str, values: dict[str, Any], args: argparse.Namespace) -> Outcome:
    """One task at one parameter point: a CSV row and a one-line summary."""
    if task == "design-welfare":
        params = cfg.market_params(values)
        res = optimize_social_welfare(params, _k_max(values))
        row = {"K*": res.K, "h*": res.h, "welfare": res.objective, "welfare_norm": res.objective / (params.V - params.c)}
        if res.sustainable:
            return Outcome(row, f"K*={res.K} h*={res.h} welfare={res.objective:.6g} ({row['welfare_norm']:.4f} of V-c)")
        return Outcome(row, "no sustainable protocol (K*=h*=0)")
    if task == "design-revenue":
        params = cfg.market_params(values)
        res = optimize_revenue(params, _k_max(values))
        row = {"lambda#": None if math.isnan(res.lam) else res.lam, "K#": res.K, "h#": res.h,
               "R#": res.objective, "R#_norm": res.objective / params.p}
        if res.sustainable:
            return Outcome(row, f"lambda#={res.lam:.6g} K#={res.K} h#={res.h} revenue={res.objective:.6g} ({row['R#_norm']:.4f} of p)")
        return Outcome(row, "no sustainable protocol")
    if task == "check":
        params = cfg.market_params(values)
        norm = cfg.norm_from(values)
        report = incentive_margins(norm, params)
        t = report.argmin
        verdict = "sustainable" if report.sustainable else "unsustainable"
        row = {"sustainable": report.sustainable, "min_margin": report.min_margin, "argmin": t}
        return Outcome(row, f"{verdict}, margin({t})={report.margins[t]:+.3f}")
    if task == "simulate":
        sim = cfg.sim_config(values)
        result = run_simulation(sim)
        p = sim.params
        row = {"welfare": result.welfare_per_worker, "welfare_norm": result.normalized_welfare,
               "revenue": result.revenue_per_worker, "revenue_norm": result.revenue_per_worker / p.p}
        return Outcome(row, f"welfare/worker={row['welfare']:.6g} ({row['welfare_norm']:.4f} of V-c) revenue/worker={row['revenue']:.6g}", result)
    if task == "price-opt":
        grid = args.p_grid if args.p_grid is not None else list(price_grid())
        if not grid:
            raise ConfigError("p_grid", "empty price grid")
        if args.method == "simulate":
            template = cfg.sim_config(values, requester_mode="strategic")
            curve = optimize_price(template, grid, "simulate", K_max=_k_max(values))
        else:
            params = cfg.market_params(values)
            curve = optimize_price(params, grid, "analytic", values.get("n_workers", 200), values.get("n_requesters", 800),
                                   values.get("delta_req", 0.5), _k_max(values))
        row = {"p*": curve.p_star, "welfare_norm": curve.best_welfare}
        if curve.p_star is None:
            return Outcome(row, "no price yields positive welfare", curve)
        return Outcome(row, f"p*={curve.p_star:.6g} welfare={curve.best_welfare:.4f} of V-c", curve)
    if task == "thresholds":
        axis = args.threshold_axis
        if axis is None:
            raise ConfigError("axis", "thresholds needs --axis r|delta|alpha")
        params = cfg.market_params(values)
        probes = existence_thresholds(axis, params, args.tol, _k_max(values), lam=params.lam)
        row = {"threshold": probes[-1].value, "lower": probes[-1].lower, "upper": probes[-1].upper}
        text = " ".join(f"{pr.axis}={pr.value:.6g} [{pr.lower:.6g}, {pr.upper:.6g}]" for pr in probes)
        return Outcome(row, text)
    raise ConfigError("task", f"unknown task {task!r}")


def _out_path(args: argparse.Namespace, default: str) -> Path:
    return Path(args.out_dir) / (args.out or default)


def _emit(args: argparse.Namespace, columns: list[str], rows: list[dict], default_name: str, x: str | None = None) -> Path:
    path = write_table(_out_path(args, default_name), columns, rows)
    if args.chart and x is not None:
        ys = [c for c in columns if c != x]
        render_chart(path, x, ys)
    return path


def cmd_single(args: argparse.Namespace) -> int:
    values = _values(args)
    out = evaluate(args.command, values, args)
    row, summary = out.row, out.summary
    if args.command == "simulate":
        result = out.detail
        prefix = Path(args.out_dir) / (Path(args.out).stem if args.out else "simulate")
        paths = result.write_csv(prefix)
        if args.chart:
            render_chart(paths[0], "period", ["welfare", "revenue"])
        print(f"{summary} -> {paths[0].parent}")
        return 0
    if args.command == "price-opt":
        curve = out.detail
        rows = [{"p": p, "welfare_norm": w} for p, w in zip(curve.prices, curve.welfare)]
        path = _emit(args, ["p", "welfare_norm"], rows, "price_opt.csv", "p")
        print(f"{summary} -> {path}")
        return 0
    if args.out:
        _emit(args, list(row), [row], args.out)
    print(summary)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    grid = args.grid
    if not grid:
        raise ConfigError("grid", "sweep grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("grid", "sweep grid must be strictly increasing")
    axis = args.sweep_axis
    if axis in INCOMPATIBLE[args.task]:
        raise ConfigError("sweep_axis", f"task {args.task} chooses {axis} itself and cannot sweep it")
    if axis == "p" and args.task == "price-opt":
        raise ConfigError("sweep_axis", "price-opt already scans p")
    if args.task == "thresholds" and axis == args.threshold_axis:
        raise ConfigError("sweep_axis", "cannot sweep the threshold axis")
    base = _values(args)
    rows = []
    columns: list[str] = [axis]
    for x in grid:
        values = dict(base)
        key = "lambda" if axis == "lambda" else axis
        if axis in ("K", "h"):
            if not float(x).is_integer():
                raise ConfigError("grid", f"{axis} values must be integers")
            x = int(x)
        if axis == "r":
            values.pop("c", None)
        values[key] = x
        row = evaluate(args.task, values, args).row
        for col in row:
            if col not in columns:
                columns.append(col)
        rows.append({axis: x, **row})
    path = _emit(args, columns, rows, f"sweep_{args.task}_{axis}.csv", axis)
    print(f"{args.task} over {axis}: {len(rows)} points -> {path}")
    return 0


def cmd_figures(args: argparse.Namespace) -> int:
    if not args.alpha:
        raise ConfigError("alpha", "need at least one alpha")
    d = FigureDefaults(p=args.p, V=args.V, delta=args.delta, delta_req=args.delta_req, alpha=args.alpha[0], T=args.T, K_max=args.K_max)
    names = FIGURES if args.figure == "all" else (args.figure,)
    paths = []
    for name in names:
        paths += write_figure(name, args.out_dir, tuple(args.alpha), d, args.chart, args.seed)
    print(f"{', '.join(names)}: wrote {len(paths)} file(s) to {args.out_dir}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "figures":
            return cmd_figures(args)
        return cmd_single(args)
    except (ConfigError, ChartError, InfeasibleError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReducibleChainError, NonBracketingError, np.linalg.LinAlgError, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def run_command(argv: Sequence[str]) -> int:
    return main(list(argv))


if __name__ == "__main__":
    sys.exit(main())
