"""Recipes that regenerate the design and pricing figures as CSV tables.

Each recipe returns ``(columns, rows)`` from a ``*_table`` function and has
a writer that stores one CSV per table (and optionally an SVG chart).
Welfare columns are also given as fractions of ``V - c`` and revenue
columns as fractions of ``p``.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .charts import render_chart
from .design import DEFAULT_K_MAX, max_revenue_unconstrained, optimize_revenue, optimize_social_welfare
from .model import MarketParams
from .pricing import optimize_price, price_grid
from .simulate import SimConfig

Row = dict[str, float | int | None]


@dataclass(frozen=True)
class FigureDefaults:
    p: float = 5.0
    V: float = 10.0
    delta: float = 0.8
    delta_req: float = 0.5
    alpha: float = 0.05
    T: int = 4
    n_workers: int = 200
    K_max: int = DEFAULT_K_MAX
    r_grid: tuple[float, ...] = field(default_factory=lambda: tuple(np.round(np.arange(1, 20) * 0.05, 10)))
    delta_grid: tuple[float, ...] = field(default_factory=lambda: tuple(np.round(np.arange(1, 20) * 0.05, 10)))


DEFAULTS = FigureDefaults()


def fmt_cell(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def table_csv(columns: Sequence[str], rows: Sequence[Row]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_table(path: str | Path, columns: Sequence[str], rows: Sequence[Row]) -> Path:
    """Write a CSV atomically (temp file, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(table_csv(columns, rows))
    os.replace(tmp, path)
    return path


def _tag(value: float) -> str:
    return format(value, "g")


# ---- design tables ---------------------------------------------------------

def fig2_table(axis: str = "r", alpha: float = DEFAULTS.alpha, delta: float = DEFAULTS.delta, r: float = 0.2,
               grid: Sequence[float] | None = None, d: FigureDefaults = DEFAULTS) -> tuple[list[str], list[Row]]:
    """Welfare-optimal ``(K*, h*)`` and its welfare along ``r`` (at ``delta``) or ``delta`` (at ``r``)."""
    if axis not in ("r", "delta"):
        raise ValueError("axis must be 'r' or 'delta'")
    grid = grid if grid is not None else (d.r_grid if axis == "r" else d.delta_grid)
    rows = []
    for x in grid:
        c = (x if axis == "r" else r) * d.p
        params = MarketParams(p=d.p, c=c, V=d.V, delta=x if axis == "delta" else delta, alpha=alpha)
        res = optimize_social_welfare(params, d.K_max)
        rows.append({axis: x, "K*": res.K, "h*": res.h, "welfare": res.objective, "welfare_norm": res.objective / (params.V - params.c)})
    return [axis, "K*", "h*", "welfare", "welfare_norm"], rows


fig3_table = fig2_table  # the welfare columns of the same optimization


def fig4_table(delta: float = DEFAULTS.delta, alpha: float = DEFAULTS.alpha, grid: Sequence[float] | None = None,
               lam_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0), d: FigureDefaults = DEFAULTS) -> tuple[list[str], list[Row]]:
    """Minimum sharing ratio, sustainable revenue and the best unsustainable revenue along ``r``."""
    grid = grid if grid is not None else d.r_grid
    rows = []
    for r in grid:
        params = MarketParams(p=d.p, c=r * d.p, V=d.V, delta=delta, alpha=alpha)
        res = optimize_revenue(params, d.K_max)
        ns = max_revenue_unconstrained(params, d.K_max, lam_grid)
        rows.append({
            "r": r,
            "lambda#": None if math.isnan(res.lam) else res.lam,
            "K#": res.K,
            "h#": res.h,
            "R#": res.objective,
            "R#_norm": res.objective / d.p,
            "R_NS#": ns,
            "R_NS#_norm": ns / d.p,
        })
    return ["r", "lambda#", "K#", "h#", "R#", "R#_norm", "R_NS#", "R_NS#_norm"], rows


# ---- pricing tables --------------------------------------------------------

def fig5_table(c: float = 0.5, alpha: float = DEFAULTS.alpha, prices: Sequence[float] | None = None,
               simulate: bool = True, periods: int = 5_000, burn_in: int = 500, seed: int = 0,
               d: FigureDefaults = DEFAULTS) -> tuple[list[str], list[Row]]:
    """Welfare against price with both norms redesigned at each price.

    Requesters follow their norm.  The simulated column reuses ``seed`` at
    every price.
    """
    prices = prices if prices is not None else price_grid(0.5, 10.0, 0.5)
    params = MarketParams(p=d.p, c=c, V=d.V, delta=d.delta, alpha=alpha)
    n_w, n_r = d.n_workers, d.n_workers * d.T
    analytic = optimize_price(params, prices, "analytic", n_w, n_r, d.delta_req, d.K_max)
    cols = ["p", "welfare_norm", "K_w", "h_w", "K_req", "h_req"]
    sim = None
    if simulate:
        template = SimConfig(params, None, n_w, n_r, periods, burn_in, seed, requester_mode="strategic", delta_req=d.delta_req)
        sim = optimize_price(template, prices, "simulate", K_max=d.K_max)
        cols.append("welfare_norm_sim")
    rows = []
    for i, p in enumerate(analytic.prices):
        m = analytic.designs[i]
        row = {"p": p, "welfare_norm": analytic.welfare[i], "K_w": m.worker.K, "h_w": m.worker.h,
               "K_req": m.requester.K, "h_req": m.requester.h}
        if sim is not None:
            row["welfare_norm_sim"] = sim.welfare[i]
        rows.append(row)
    return cols, rows


FIG6_CASES = ((0.05, 4), (0.1, 4), (0.05, 8))


def fig6_column(alpha: float, T: int) -> str:
    return f"p*_a{_tag(alpha)}_T{T}"


def fig6_table(cv_grid: Sequence[float] = (0.01, 0.02, 0.03, 0.04, 0.05, 0.06),
               cases: Sequence[tuple[float, int]] = FIG6_CASES, prices: Sequence[float] | None = None,
               d: FigureDefaults = DEFAULTS) -> tuple[list[str], list[Row]]:
    """Optimal price against ``c / V`` for each ``(alpha, T)``; ``nan`` where no price works."""
    prices = prices if prices is not None else price_grid()
    rows = []
    for cv in cv_grid:
        row: Row = {"c/V": cv}
        for alpha, T in cases:
            params = MarketParams(p=d.p, c=cv * d.V, V=d.V, delta=d.delta, alpha=alpha)
            curve = optimize_price(params, prices, "analytic", d.n_workers, d.n_workers * T, d.delta_req, d.K_max)
            row[fig6_column(alpha, T)] = curve.p_star
        rows.append(row)
    return ["c/V", *(fig6_column(a, T) for a, T in cases)], rows


# ---- writers ---------------------------------------------------------------

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")


def write_figure(name: str, out_dir: str | Path, alphas: Sequence[float] = (DEFAULTS.alpha,),
                 d: FigureDefaults = DEFAULTS, charts: bool = False, seed: int = 0) -> list[Path]:
    """Write the CSV tables (and charts) of one figure; returns the written paths."""
    if name not in FIGURES:
        raise ValueError(f"unknown figure {name!r}; expected one of {FIGURES}")
    out_dir = Path(out_dir)
    written: list[tuple[Path, str, list[str], Path]] = []

    if name in ("fig2", "fig3"):
        ys = ["K*", "h*"] if name == "fig2" else ["welfare_norm"]
        for alpha in alphas:
            for axis in ("r", "delta"):
                cols, rows = fig2_table(axis, alpha, d.delta, d=d)
                path = write_table(out_dir / f"{name}_{axis}_alpha{_tag(alpha)}.csv", cols, rows)
                written.append((path, axis, ys, path.with_suffix(".svg")))
    elif name == "fig4":
        for alpha in alphas:
            cols, rows = fig4_table(d.delta, alpha, d=d)
            path = write_table(out_dir / f"fig4_alpha{_tag(alpha)}.csv", cols, rows)
            written.append((path, "r", ["lambda#"], path.with_name(path.stem + "_sharing.svg")))
            written.append((path, "r", ["R#_norm", "R_NS#_norm"], path.with_name(path.stem + "_revenue.svg")))
    elif name == "fig5":
        for alpha in alphas:
            cols, rows = fig5_table(alpha=alpha, seed=seed, d=d)
            path = write_table(out_dir / f"fig5_alpha{_tag(alpha)}.csv", cols, rows)
            written.append((path, "p", ["welfare_norm", "welfare_norm_sim"], path.with_suffix(".svg")))
    else:
        cols, rows = fig6_table(d=d)
        path = write_table(out_dir / "fig6.csv", cols, rows)
        written.append((path, "c/V", cols[1:], path.with_suffix(".svg")))

    paths = []
    for path, x, ys, svg in written:
        if path not in paths:
            paths.append(path)
        if charts:
            paths.append(render_chart(path, x, ys, svg, title=name))
    return paths
