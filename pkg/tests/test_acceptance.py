"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary).

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import math
import warnings

import numpy as np
import pytest

from crowdnorms.analytic import (
    ReducibleChainWarning,
    balance_residual,
    bellman_residual,
    best_response_policy,
    incentive_margins,
    marginal_utilities,
    solve_value_function,
    stationary_distribution,
    social_welfare,
    transition_matrix,
)
from crowdnorms.design import (
    exists_sustainable,
    existence_thresholds,
    is_sustainable,
    min_sharing_ratio,
    norms,
    optimize_revenue,
    optimize_social_welfare,
    sustainability_frontier,
    welfare_under_best_response,
    NonBracketingError,
)
from crowdnorms.figures import FIG6_CASES, fig2_table, fig4_table, fig5_table, fig6_column, fig6_table
from crowdnorms.model import MarketParams, SocialNorm
from crowdnorms.simulate import SimConfig, run_simulation

BASE = MarketParams(p=5, c=1, V=10, delta=0.8, alpha=0.1, lam=1.0)
GRID_DELTAS = (0.6, 0.8, 0.95)
GRID_ALPHAS = (0.05, 0.1, 0.2)
GRID_COSTS = (0.5, 1.0, 2.0)
LAMBDAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def grid_params():
    for d in GRID_DELTAS:
        for a in GRID_ALPHAS:
            for c in GRID_COSTS:
                yield MarketParams(p=5, c=c, V=10, delta=d, alpha=a)


def random_instances(n=200, seed=20240601):
    """Half drawn broadly, half near the region where sustainable norms live (h close to K, cheap effort)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        K = int(rng.integers(1, 31))
        near = i % 2 == 1
        h = int(rng.integers(max(1, K - 2), K + 1)) if near else int(rng.integers(1, K + 1))
        params = MarketParams(
            p=5.0,
            c=float(rng.uniform(0.1, 2.5 if near else 4.9)),
            V=10.0,
            delta=float(rng.uniform(0.5 if near else 0.0, 0.99)),
            alpha=float(rng.uniform(0.01, 0.3 if near else 0.49)),
            lam=float(rng.uniform(0.6 if near else 0.0, 1.0)),
        )
        out.append((SocialNorm(K, h), params))
    return out


INSTANCES = random_instances()


def nondecreasing(xs, tol=1e-12):
    return all(b >= a - tol for a, b in zip(xs, xs[1:]))


def nonincreasing(xs, tol=1e-12):
    return all(b <= a + tol for a, b in zip(xs, xs[1:]))


# ---- 1: Bellman and stationarity -------------------------------------------

def test_1a_bellman_residual(criterion):
    worst = max(np.abs(bellman_residual(solve_value_function(n, p), n, p)).max() for n, p in INSTANCES)
    assert criterion("1a", worst <= 1e-10, f"max Bellman residual {worst:.2e} over {len(INSTANCES)} instances (<= 1e-10)")


def test_1b_stationarity(criterion):
    worst = 0.0
    for n, p in INSTANCES:
        eta = stationary_distribution(n, p)
        worst = max(worst, np.abs(eta @ transition_matrix(n, p) - eta).max())
    assert criterion("1b", worst <= 1e-12, f"max |eta P - eta| {worst:.2e} (<= 1e-12)")


def test_1c_balance_equations(criterion):
    cases = [(n, p) for n, p in INSTANCES if n.h < n.K]
    worst = max(np.abs(balance_residual(stationary_distribution(n, p), n, p)).max() for n, p in cases)
    assert criterion("1c", worst <= 1e-12, f"max balance residual {worst:.2e} over {len(cases)} instances with h < K")


# ---- 2: one-shot deviation versus MDP best response -------------------------

def test_2_oracle_equivalence(criterion):
    bad = [(n, p) for n, p in INSTANCES if incentive_margins(n, p).sustainable != best_response_policy(n, p).is_compliant()]
    n_sus = sum(incentive_margins(n, p).sustainable for n, p in INSTANCES)
    assert criterion("2", not bad, f"{len(bad)} disagreements over {len(INSTANCES)} instances ({n_sus} sustainable)")


# ---- 3: hand-derived fixtures ------------------------------------------------

def test_3a_value_fixture(criterion):
    v = solve_value_function(SocialNorm(1, 1), BASE)
    ok = np.allclose(v, [14.8148, 18.5185], atol=1e-3)
    assert criterion("3a", ok, f"v = ({v[0]:.4f}, {v[1]:.4f}) vs (14.8148, 18.5185)")


def test_3b_stationary_fixture(criterion):
    eta = stationary_distribution(SocialNorm(1, 1), BASE)
    err = np.abs(eta - [1 / 11, 10 / 11]).max()
    assert criterion("3b", err <= 1e-9, f"eta = ({eta[0]:.10f}, {eta[1]:.10f}), error {err:.1e}")


def test_3c_margin_fixture(criterion):
    m = incentive_margins(SocialNorm(1, 1), BASE).margins[1]
    assert criterion("3c", abs(m - 1.370) <= 1e-3, f"margin(1) = {m:+.4f} vs +1.370")


def test_3d_min_sharing_ratio_fixture(criterion):
    lam = min_sharing_ratio(SocialNorm(1, 1), BASE)
    assert criterion("3d", abs(lam - 0.5375) <= 1e-4, f"lambda_min = {lam:.6f} vs 0.5375")


def test_3e_rejected_variant(criterion):
    rep = incentive_margins(SocialNorm(2, 1), BASE)
    ok = abs(rep.margins[2] + 0.800) <= 1e-3 and not rep.sustainable
    assert criterion("3e", ok, f"(K=2,h=1) margin(2) = {rep.margins[2]:+.4f}, sustainable={rep.sustainable}")


# ---- 4: properties of marginal utilities -------------------------------------

def test_4_marginal_utility_properties(criterion):
    checked, violations = 0, []
    for params in grid_params():
        for n in norms(30):
            if not is_sustainable(n, params):
                continue
            checked += 1
            d = marginal_utilities(n, params)
            K, h = n.K, n.h
            if not (d[:K] > 0).all():
                violations.append((n, params, "positive"))
            if not all(d[t] > d[t + 1] for t in range(h, K - 1)):
                violations.append((n, params, "decreasing"))
            if not d[:h].sum() > d[h]:
                violations.append((n, params, "isolation"))
    assert criterion("4", checked > 0 and not violations, f"{len(violations)} violations over {checked} sustainable norms")


# ---- 5: threshold structure ---------------------------------------------------

def test_5_threshold_structure(criterion):
    violations = []
    for params in grid_params():
        violations += sustainability_frontier(params, 30).violations
    assert criterion("5", not violations, f"{len(violations)} h/K scans with more than one flip over {len(list(grid_params()))} parameter points")


# ---- 6: existence thresholds --------------------------------------------------

def _flip_ok(probe, pred):
    return probe.width <= 1e-3 and pred(probe.lower) != pred(probe.upper)


def test_6a_cost_ratio_threshold(criterion):
    params = BASE.replace(alpha=0.1, delta=0.8)
    (probe,) = existence_thresholds("r", params, tol=1e-3)
    ok = _flip_ok(probe, lambda r: exists_sustainable(params.replace(c=r * params.p))) and probe.below
    assert criterion("6a", ok, f"r_bar = {probe.value:.4f} in [{probe.lower:.5f}, {probe.upper:.5f}] (delta=0.8, alpha=0.1)")


def test_6b_discount_threshold(criterion):
    params = BASE.replace(alpha=0.1)
    (probe,) = existence_thresholds("delta", params, tol=1e-3)
    ok = _flip_ok(probe, lambda d: exists_sustainable(params.replace(delta=d))) and not probe.below
    assert criterion("6b", ok, f"delta_low = {probe.value:.4f} in [{probe.lower:.5f}, {probe.upper:.5f}] (r=0.2, alpha=0.1)")


def test_6c_upper_error_threshold(criterion):
    probes = existence_thresholds("alpha", BASE, tol=1e-3)
    upper = [p for p in probes if p.axis == "alpha-upper"][0]
    ok = _flip_ok(upper, lambda a: exists_sustainable(BASE.replace(alpha=a)))
    assert criterion("6c", ok, f"alpha_bar = {upper.value:.4f} in [{upper.lower:.5f}, {upper.upper:.5f}] (r=0.2, delta=0.8)")


def test_6d_lower_error_threshold(criterion):
    probes = existence_thresholds("alpha", BASE, tol=1e-3)
    lower = [p for p in probes if p.axis == "alpha-lower"]
    at_zero = exists_sustainable(BASE.replace(alpha=0.0))
    ok = bool(lower) and _flip_ok(lower[0], lambda a: exists_sustainable(BASE.replace(alpha=a)))
    detail = (
        f"alpha_low = {lower[0].value:.4f}" if lower
        else f"no lower flip: a sustainable protocol exists at alpha=0 ({at_zero}), so no lower threshold on [0, 1/2]"
    )
    assert criterion("6d", ok, detail)


def test_6e_patient_cheap_market_has_protocol(criterion):
    params = MarketParams(p=5, c=0.05, V=10, delta=0.99, alpha=0.05)
    ok = exists_sustainable(params)
    assert criterion("6e", ok, f"exists at (r=0.01, delta=0.99, alpha=0.05): {ok}")


def test_6f_degenerate_markets_have_none(criterion):
    a = exists_sustainable(BASE.replace(delta=0.0))
    b = exists_sustainable(BASE.replace(alpha=0.5))
    assert criterion("6f", not a and not b, f"exists at delta=0: {a}; at alpha=1/2: {b}")


# ---- 7: revenue-optimal sharing ratio ---------------------------------------

R_GRID = [round(0.05 * k, 10) for k in range(1, 20)]
D_GRID = [round(0.3 + 0.05 * k, 10) for k in range(14)] + [0.99]
REV_ALPHA = 0.05


@pytest.fixture(scope="module")
def revenue_sweeps():
    by_r = [optimize_revenue(MarketParams(p=5, c=r * 5, V=10, delta=0.8, alpha=REV_ALPHA)) for r in R_GRID]
    by_d = [optimize_revenue(MarketParams(p=5, c=1, V=10, delta=d, alpha=REV_ALPHA)) for d in D_GRID]
    return by_r, by_d


def _lams(results):
    return [res.lam for res in results if res.sustainable]


def test_7a_sharing_ratio_rises_with_cost(criterion, revenue_sweeps):
    lams = _lams(revenue_sweeps[0])
    assert criterion("7a", nondecreasing(lams), f"lambda# over r: {', '.join(f'{x:.3f}' for x in lams)}")


def test_7b_sharing_ratio_falls_with_patience(criterion, revenue_sweeps):
    lams = _lams(revenue_sweeps[1])
    assert criterion("7b", nonincreasing(lams), f"lambda# over delta: {', '.join(f'{x:.3f}' for x in lams)}")


def test_7c_sharing_ratio_exceeds_cost_ratio(criterion, revenue_sweeps):
    by_r, by_d = revenue_sweeps
    gaps = [res.lam - r for res, r in zip(by_r, R_GRID) if res.sustainable] + [res.lam - 0.2 for res in by_d if res.sustainable]
    assert criterion("7c", min(gaps) > 0, f"min lambda# - r = {min(gaps):.4f} over {len(gaps)} points")


def test_7d_patient_limit(criterion):
    res = optimize_revenue(MarketParams(p=5, c=1, V=10, delta=0.999, alpha=REV_ALPHA))
    gap = res.lam - 0.2
    assert criterion("7d", gap <= 0.02, f"delta=0.999, r=0.2: lambda# = {res.lam:.4f} (norm K={res.K}, h={res.h}), lambda# - r = {gap:.4f} (<= 0.02)")


def test_7e_revenue_falls_with_cost(criterion, revenue_sweeps):
    revs = [res.objective for res in revenue_sweeps[0]]
    assert criterion("7e", nonincreasing(revs), f"R#/p over r: {', '.join(f'{x / 5:.3f}' for x in revs)}")


def test_7f_revenue_rises_with_patience(criterion, revenue_sweeps):
    revs = [res.objective for res in revenue_sweeps[1]]
    assert criterion("7f", nondecreasing(revs), f"R#/p over delta: {', '.join(f'{x / 5:.3f}' for x in revs)}")


# ---- 8: unsustainable protocols never beat the welfare optimum --------------

def test_8_best_response_welfare_bounded(criterion):
    checked, worst, bad = 0, -math.inf, 0
    for base in grid_params():
        opt = optimize_social_welfare(base).objective
        for lam in LAMBDAS:
            params = base.replace(lam=lam)
            for n in norms(30):
                if is_sustainable(n, params):
                    continue
                checked += 1
                excess = welfare_under_best_response(n, params) - opt
                worst = max(worst, excess)
                bad += excess > 1e-9
    assert criterion("8", bad == 0, f"{bad} of {checked} unsustainable protocols exceed the optimum (max excess {worst:+.4f})")


# ---- 9: figure shapes -------------------------------------------------------

FIG_R = [round(0.05 * k, 10) for k in range(1, 20)]


@pytest.fixture(scope="module")
def fig2_rows():
    return {a: fig2_table("r", a, 0.8, grid=FIG_R + [0.99])[1] for a in (0.05, 0.1)}


def test_9a_fig2_ceiling_falls_with_cost(criterion, fig2_rows):
    seqs = {a: [row["K*"] for row in rows] for a, rows in fig2_rows.items()}
    ok = all(nonincreasing(s) for s in seqs.values())
    detail = "; ".join(f"alpha={a}: K* = {' '.join(map(str, s))}" for a, s in seqs.items())
    assert criterion("9a", ok, detail)


def test_9b_fig2_sentinel(criterion, fig2_rows):
    tails = {a: (rows[-1]["K*"], rows[-1]["h*"]) for a, rows in fig2_rows.items()}
    ok = all(t == (0, 0) for t in tails.values())
    assert criterion("9b", ok, f"(K*, h*) at r=0.99: {tails}")


def test_9c_fig3_near_efficient(criterion):
    params = MarketParams(p=5, c=1, V=10, delta=0.95, alpha=0.05)
    res = optimize_social_welfare(params)
    w = res.objective / (params.V - params.c)
    assert criterion("9c", w >= 0.9, f"normalized welfare {w:.4f} at (alpha=0.05, delta=0.95, r=0.2) (>= 0.9)")


def test_9d_fig4_sustainable_revenue_dominates(criterion):
    _, rows = fig4_table(0.8, 0.05, grid=FIG_R)
    bad = [row["r"] for row in rows if row["R#"] < row["R_NS#"] - 1e-12 and row["K#"] != 0]
    detail = (
        f"R# < R_NS# where a sustainable protocol exists at r = {bad}; "
        + ", ".join(f"r={row['r']}: {row['R#_norm']:.3f} vs {row['R_NS#_norm']:.3f}" for row in rows[:4])
    )
    assert criterion("9d", not bad, detail)


@pytest.fixture(scope="module")
def fig5_rows():
    return fig5_table(c=0.5, alpha=0.05, simulate=True, periods=5000, burn_in=500, seed=5)[1]


def test_9e_fig5_unimodal(criterion, fig5_rows):
    w = [row["welfare_norm_sim"] for row in fig5_rows]
    k = int(np.argmax(w))
    ok = nondecreasing(w[: k + 1], 1e-9) and nonincreasing(w[k:], 1e-9) and w[k] > 0
    assert criterion("9e", ok, "simulated welfare over p: " + " ".join(f"{x:.3f}" for x in w))


def test_9f_fig5_vanishes_at_full_value(criterion, fig5_rows):
    last = fig5_rows[-1]
    ok = last["p"] == 10 and last["welfare_norm_sim"] <= 0.05
    assert criterion("9f", ok, f"simulated normalized welfare at p=10: {last['welfare_norm_sim']:.4f} (<= 0.05)")


@pytest.fixture(scope="module")
def fig6_rows():
    return fig6_table()[1]


def _pstar(rows, alpha, T):
    return [row[fig6_column(alpha, T)] for row in rows]


def _show(xs):
    return " ".join("none" if x is None else f"{x:.2f}" for x in xs)


def test_9g_fig6_price_rises_with_cost(criterion, fig6_rows):
    seqs = {case: _pstar(fig6_rows, *case) for case in FIG6_CASES}
    ok = all(None not in s and nondecreasing(s) for s in seqs.values())
    assert criterion("9g", ok, "; ".join(f"alpha={a}, T={T}: p* = {_show(s)}" for (a, T), s in seqs.items()))


def test_9h_fig6_noisier_reports_need_higher_price(criterion, fig6_rows):
    lo, hi = _pstar(fig6_rows, 0.05, 4), _pstar(fig6_rows, 0.1, 4)
    pairs = [(a, b) for a, b in zip(lo, hi) if a is not None and b is not None]
    ok = len(pairs) == len(lo) and all(b >= a for a, b in pairs) and any(b > a for a, b in pairs)
    assert criterion("9h", ok, f"p*(alpha=0.05) = {_show(lo)}; p*(alpha=0.1) = {_show(hi)}")


def test_9i_fig6_more_requesters_lower_price(criterion, fig6_rows):
    t4, t8 = _pstar(fig6_rows, 0.05, 4), _pstar(fig6_rows, 0.05, 8)
    pairs = [(a, b) for a, b in zip(t4, t8) if a is not None and b is not None]
    ok = len(pairs) == len(t4) and all(b <= a for a, b in pairs) and any(b < a for a, b in pairs)
    assert criterion("9i", ok, f"p*(T=4) = {_show(t4)}; p*(T=8) = {_show(t8)}")


# ---- 10: simulation convergence -------------------------------------------

@pytest.fixture(scope="module")
def long_run():
    cfg = SimConfig(BASE, SocialNorm(1, 1), n_workers=200, n_requesters=800, periods=100_000, burn_in=1_000, seed=2024)
    return cfg, run_simulation(cfg)


def test_10a_reputation_distribution(criterion, long_run):
    _, res = long_run
    eta = stationary_distribution(SocialNorm(1, 1), BASE)
    err = float(np.abs(res.reputation_dist - eta).sum())
    assert criterion("10a", err <= 0.02, f"||eta_hat - eta||_1 = {err:.2e} (<= 0.02)")


def test_10b_welfare(criterion, long_run):
    _, res = long_run
    ref = social_welfare(SocialNorm(1, 1), BASE)
    rel = abs(res.welfare_per_worker - ref) / ref
    assert criterion("10b", rel <= 0.02, f"welfare/worker {res.welfare_per_worker:.4f} vs {ref:.4f} (rel. error {rel:.1e})")


def test_10c_byte_identical_rerun(criterion, long_run, tmp_path):
    cfg, res = long_run
    again = run_simulation(cfg)
    a = [p.read_bytes() for p in res.write_csv(tmp_path / "a")]
    b = [p.read_bytes() for p in again.write_csv(tmp_path / "b")]
    assert criterion("10c", a == b, f"{len(a)} CSV files byte-identical across reruns: {a == b}")
