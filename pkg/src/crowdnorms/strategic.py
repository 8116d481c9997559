"""Requester-side norms for markets where requesters may withhold payment.

Requesters carry their own threshold norm: paying raises their reputation,
withholding lowers it, and an isolated requester cannot post tasks.
Payment is observed without error.  An active requester is matched with a
worker with probability ``match_prob`` per period, so its incentives are
diluted by how rarely it transacts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .analytic import IncentiveReport, ReducibleChainWarning, compliant_active_fraction, policy_iteration, stationary
from .design import DEFAULT_K_MAX, DesignResult, norms, optimize_social_welfare
from .model import MarketParams, SocialNorm, chain_matrix


@dataclass(frozen=True)
class RequesterSide:
    """What a requester faces: its patience, match rate, and worker effort rate."""

    delta: float = 0.5
    match_prob: float = 0.25
    worker_high: float = 1.0

    def __post_init__(self):
        if not 0 <= self.delta < 1:
            raise ValueError("requester discount must lie in [0, 1)")
        if not 0 <= self.match_prob <= 1:
            raise ValueError("match probability must lie in [0, 1]")
        if not 0 <= self.worker_high <= 1:
            raise ValueError("worker effort rate must lie in [0, 1]")


def _stationary_quiet(P: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReducibleChainWarning)
        return stationary(P)


def requester_values(norm: SocialNorm, params: MarketParams, side: RequesterSide, pays: np.ndarray | None = None) -> np.ndarray:
    """Discounted requester utility per reputation; ``pays`` defaults to always paying when active."""
    K, h = norm.K, norm.h
    if pays is None:
        pays = np.ones(K + 1, dtype=bool)
    benefit = side.worker_high * params.V
    P = chain_matrix(K, h, pays, 0.0, side.match_prob)
    u = np.zeros(K + 1)
    u[h:] = side.match_prob * np.where(pays[h:], benefit - params.p, benefit)
    return np.linalg.solve(np.eye(K + 1) - side.delta * P, u)


def requester_margins(norm: SocialNorm, params: MarketParams, side: RequesterSide) -> IncentiveReport:
    """Gain from paying over withholding once, for a matched active requester."""
    v = requester_values(norm, params, side)
    margins = {}
    for theta in norm.active_states:
        down = theta - 1 if theta > norm.h else 0
        margins[theta] = float(side.delta * (v[min(norm.K, theta + 1)] - v[down]) - params.p)
    return IncentiveReport(margins)


def requester_best_response(norm: SocialNorm, params: MarketParams, side: RequesterSide) -> np.ndarray:
    """Pay/withhold mask over ``0..K`` maximizing discounted requester utility."""
    benefit = side.worker_high * params.V
    return policy_iteration(norm.K, norm.h, 0.0, benefit - params.p, benefit, side.delta, side.match_prob)


@lru_cache(maxsize=65536)
def _requester_gaps(K: int, h: int, match_prob: float, delta: float) -> tuple[float, ...]:
    """Payment gaps of an always-paying requester per unit of per-match surplus.

    Values scale linearly with the surplus ``V - p``, so margins at any
    price follow as ``delta * (V - p) * gap - p``.
    """
    P = chain_matrix(K, h, np.ones(K + 1, dtype=bool), 0.0, match_prob)
    u = np.zeros(K + 1)
    u[h:] = match_prob
    w = np.linalg.solve(np.eye(K + 1) - delta * P, u)
    return tuple(float(w[min(K, t + 1)] - w[t - 1 if t > h else 0]) for t in range(h, K + 1))


@lru_cache(maxsize=65536)
def _posting_fraction(K: int, h: int, match_prob: float) -> float:
    P = chain_matrix(K, h, np.ones(K + 1, dtype=bool), 0.0, match_prob)
    return float(_stationary_quiet(P)[h:].sum())


def design_requester_norm(params: MarketParams, side: RequesterSide, K_max: int = DEFAULT_K_MAX) -> DesignResult:
    """Sustainable requester norm maximizing the posting (active) fraction.

    Ties go to the smaller threshold, then the larger ceiling.
    """
    surplus = side.worker_high * params.V - params.p
    found = []
    for norm in norms(K_max):
        gaps = _requester_gaps(norm.K, norm.h, float(side.match_prob), float(side.delta))
        if all(side.delta * surplus * g - params.p >= 0 for g in gaps):
            found.append((_posting_fraction(norm.K, norm.h, float(side.match_prob)), -norm.h, norm.K, norm))
    if not found:
        return DesignResult.sentinel()
    active, _, _, norm = max(found, key=lambda t: t[:3])
    return DesignResult(norm.K, norm.h, 1.0, active, True, requester_margins(norm, params, side))


@dataclass(frozen=True)
class MarketDesign:
    """Jointly designed worker and requester norms at one price.

    ``welfare`` is the mean-field per-worker welfare as a fraction of the
    Pareto bound ``V - c``.
    """

    params: MarketParams
    worker: DesignResult
    requester: DesignResult
    match_prob: float
    welfare: float

    @property
    def worker_norm(self) -> SocialNorm | None:
        return self.worker.norm

    @property
    def requester_norm(self) -> SocialNorm | None:
        return self.requester.norm


def design_market(
    params: MarketParams,
    n_workers: int = 200,
    n_requesters: int = 800,
    delta_req: float = 0.5,
    K_max: int = DEFAULT_K_MAX,
) -> MarketDesign:
    """Design both norms at price ``params.p`` with the full payment going to workers.

    Workers are designed first, assuming they are paid.  Requesters are
    matched at the rate the resulting active workers can serve.  Without a
    sustainable requester norm nobody pays, so no worker norm survives and
    the market produces nothing.
    """
    params = params.replace(lam=1.0)
    worker = optimize_social_welfare(params, K_max)
    if not worker.sustainable:
        return MarketDesign(params, worker, DesignResult.sentinel(), 0.0, 0.0)
    active = compliant_active_fraction(worker.norm, params.alpha)
    q = min(1.0, active * n_workers / n_requesters)
    requester = design_requester_norm(params, RequesterSide(delta_req, q, 1.0), K_max)
    if not requester.sustainable:
        return MarketDesign(params, DesignResult.sentinel(), requester, q, 0.0)
    matched = min(active * n_workers, requester.objective * n_requesters) / n_workers
    return MarketDesign(params, worker, requester, q, matched)


@dataclass(frozen=True)
class StrategicPolicies:
    """State-indexed behaviour of both sides for a simulation run."""

    worker_high: np.ndarray
    requester_pays: np.ndarray | None
    converged: bool = True


def _worker_stats(norm: SocialNorm | None, high: np.ndarray, alpha: float) -> tuple[float, float]:
    """(active fraction, H share among active workers) in the long run."""
    if norm is None:
        return 1.0, float(high[0])
    eta = _stationary_quiet(chain_matrix(norm.K, norm.h, high, alpha))
    active = float(eta[norm.h:].sum())
    return active, float(eta[norm.h:] @ high[norm.h:]) / active if active > 0 else 0.0


def _requester_stats(norm: SocialNorm | None, pays: np.ndarray, q: float) -> tuple[float, float]:
    """(posting fraction, pay share among posting requesters) in the long run."""
    if norm is None:
        return 1.0, float(pays[0])
    eta = _stationary_quiet(chain_matrix(norm.K, norm.h, pays, 0.0, q))
    active = float(eta[norm.h:].sum())
    return active, float(eta[norm.h:] @ pays[norm.h:]) / active if active > 0 else 0.0


def strategic_policies(
    params: MarketParams,
    worker_norm: SocialNorm | None,
    requester_norm: SocialNorm | None,
    n_workers: int,
    n_requesters: int,
    delta_req: float,
    worker_policy: str = "compliant",
    requester_policy: str = "compliant",
    max_rounds: int = 50,
) -> StrategicPolicies:
    """Resolve both sides' state-indexed actions.

    A side without a norm plays its myopic stage action (L, withhold).
    ``compliant`` follows the norm; ``best-response`` iterates mutual
    best responses under mean-field match rates until the masks settle.
    """
    def initial(norm, policy):
        if norm is None:
            return np.zeros(1, dtype=bool)
        mask = np.zeros(norm.K + 1, dtype=bool)
        mask[norm.h:] = policy != "all-L"
        return mask

    high = initial(worker_norm, worker_policy)
    pays = initial(requester_norm, requester_policy)
    q_req = min(1.0, n_workers / n_requesters)
    for _ in range(max_rounds):
        w_active, w_high = _worker_stats(worker_norm, high, params.alpha)
        r_active, r_pays = _requester_stats(requester_norm, pays, q_req)
        q_req = min(1.0, w_active * n_workers / max(r_active * n_requesters, 1e-300))
        q_work = min(1.0, r_active * n_requesters / max(w_active * n_workers, 1e-300))
        new_pays, new_high = pays, high
        if requester_policy == "best-response" and requester_norm is not None:
            side = RequesterSide(delta_req, q_req, w_high)
            new_pays = requester_best_response(requester_norm, params, side)
        if worker_policy == "best-response" and worker_norm is not None:
            paid = r_pays * params.lam * params.p
            new_high = policy_iteration(
                worker_norm.K, worker_norm.h, params.alpha, paid - params.c, paid, params.delta, q_work
            )
        if np.array_equal(new_pays, pays) and np.array_equal(new_high, high):
            return StrategicPolicies(high, pays)
        pays, high = new_pays, new_high
    return StrategicPolicies(high, pays, converged=False)
