"""Closed-form quantities of a worker social norm.

Value functions solve ``(I - delta P) v = u`` directly; stationary
distributions come from the GTH elimination on the unique closed class of
the chain.  Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse.csgraph import connected_components

from .model import MarketParams, SocialNorm, WorkerStrategy, chain_matrix, transition_matrix


class ReducibleChainError(ValueError):
    """The chain has several closed classes, so no unique stationary law."""


class ReducibleChainWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IncentiveReport:
    """Incentive margin per active reputation and the resulting verdict."""

    margins: dict[int, float]
    sustainable: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sustainable", all(m >= 0 for m in self.margins.values()))

    @property
    def min_margin(self) -> float:
        return min(self.margins.values())

    @property
    def argmin(self) -> int:
        return min(self.margins, key=lambda t: (self.margins[t], -t))


def _strategy(norm: SocialNorm, strategy: WorkerStrategy | None) -> WorkerStrategy:
    return WorkerStrategy.compliant(norm) if strategy is None else strategy


def one_period_utility(theta: int, norm: SocialNorm, params: MarketParams) -> float:
    """Per-period utility of a compliant worker at reputation ``theta``."""
    return params.lam * params.p - params.c if norm.is_active(theta) else 0.0


def period_rewards(norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> np.ndarray:
    """Per-period worker utility over ``0..K``; active L states keep the payment."""
    mask = _strategy(norm, strategy).high_mask()
    u = np.zeros(norm.K + 1)
    paid = params.lam * params.p
    u[norm.h:] = np.where(mask[norm.h:], paid - params.c, paid)
    return u


def solve_value_function(norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> np.ndarray:
    """Discounted long-term utility ``v(theta)`` for ``theta = 0..K``."""
    if not params.delta < 1:
        raise ValueError("discount factor must be < 1")
    strategy = _strategy(norm, strategy)
    P = transition_matrix(norm, params, strategy)
    u = period_rewards(norm, params, strategy)
    return np.linalg.solve(np.eye(norm.K + 1) - params.delta * P, u)


def value_iteration(P: np.ndarray, u: np.ndarray, delta: float, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Fixed-point iteration of ``v = u + delta P v``; slow but independent of the linear solve."""
    v = np.zeros_like(u)
    for _ in range(max_iter):
        nxt = u + delta * (P @ v)
        if np.max(np.abs(nxt - v)) <= tol * (1 - delta):
            return nxt
        v = nxt
    raise RuntimeError("value iteration did not converge")


def bellman_residual(v: np.ndarray, norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> np.ndarray:
    strategy = _strategy(norm, strategy)
    P = transition_matrix(norm, params, strategy)
    return v - period_rewards(norm, params, strategy) - params.delta * (P @ v)


def _closed_classes(P: np.ndarray) -> list[np.ndarray]:
    n_comp, labels = connected_components(P > 0, directed=True, connection="strong")
    src, dst = np.nonzero(P > 0)
    leaky = np.zeros(n_comp, dtype=bool)
    leaky[labels[src[labels[src] != labels[dst]]]] = True
    return [np.flatnonzero(labels == comp) for comp in np.flatnonzero(~leaky)]


def is_irreducible(P: np.ndarray) -> bool:
    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    return n_comp == 1


def gth(P: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible row-stochastic matrix (Grassmann-Taksar-Heyman).

    Subtraction-free, so the result is nonnegative to working precision.
    """
    A = np.array(P, dtype=float)
    n = len(A)
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def stationary(P: np.ndarray) -> np.ndarray:
    """Stationary law of a chain with a single closed class.

    Transient states get zero mass (with a warning).  Several closed
    classes mean the long-run law depends on the start, which is an error.
    """
    closed = _closed_classes(P)
    if len(closed) != 1:
        raise ReducibleChainError(f"chain has {len(closed)} closed classes; stationary law is not unique")
    members = closed[0]
    eta = np.zeros(len(P))
    if len(members) < len(P):
        warnings.warn(
            f"reducible chain: {len(P) - len(members)} transient state(s) carry no stationary mass",
            ReducibleChainWarning,
            stacklevel=3,
        )
    eta[members] = gth(P[np.ix_(members, members)])
    return eta


def stationary_distribution(norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> np.ndarray:
    """Long-run reputation mass ``eta(theta)`` for ``theta = 0..K``."""
    return stationary(transition_matrix(norm, params, strategy))


def balance_residual(eta: np.ndarray, norm: SocialNorm, params: MarketParams) -> np.ndarray:
    """Residuals of the explicit compliant balance equations (requires h < K).

    One entry per equation, top state first, down to state 0.
    """
    K, h, a = norm.K, norm.h, params.alpha
    if not h < K:
        raise ValueError("the explicit balance equations assume h < K")
    res = [eta[K] - (1 - a) * eta[K] - (1 - a) * eta[K - 1]]
    for t in range(K - 1, h, -1):
        res.append(eta[t] - (1 - a) * eta[t - 1] - a * eta[t + 1])
    res.append(eta[h] - (eta[h - 1] if h >= 1 else 0.0) - a * eta[h + 1])
    for t in range(h - 1, 0, -1):
        res.append(eta[t] - eta[t - 1])
    res.append(eta[0] - a * eta[h])
    return np.array(res)


def transaction_surplus(norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> np.ndarray:
    """Per-period worker plus requester utility at each reputation."""
    mask = _strategy(norm, strategy).high_mask()
    u = period_rewards(norm, params, strategy)
    req = np.where(mask, params.V - params.p, -params.p)
    u[norm.h:] += req[norm.h:]
    return u


def social_welfare(norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> float:
    """Expected one-period utility per worker in the stationary regime."""
    eta = stationary_distribution(norm, params, strategy)
    return float(eta @ transaction_surplus(norm, params, strategy))


def active_fraction(norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> float:
    return float(stationary_distribution(norm, params, strategy)[norm.h:].sum())


def revenue(norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> float:
    """Website income per worker per period; every active worker is matched and pays the fee."""
    return active_fraction(norm, params, strategy) * (1 - params.lam) * params.p


def _deviation_gaps(v: np.ndarray, norm: SocialNorm) -> dict[int, float]:
    gaps = {}
    for theta in norm.active_states:
        down = theta - 1 if theta > norm.h else 0
        gaps[theta] = v[min(norm.K, theta + 1)] - v[down]
    return gaps


def incentive_margins(norm: SocialNorm, params: MarketParams) -> IncentiveReport:
    """Gain from complying over a one-shot deviation to L, per active state."""
    v = solve_value_function(norm, params)
    scale = params.delta * (1 - 2 * params.alpha)
    return IncentiveReport({t: float(scale * g - params.c) for t, g in _deviation_gaps(v, norm).items()})


def marginal_utilities(norm: SocialNorm, params: MarketParams) -> np.ndarray:
    """``v(min(K, theta + 1)) - v(theta)``; the last entry is 0."""
    v = solve_value_function(norm, params)
    return np.append(v[1:], v[-1]) - v


@lru_cache(maxsize=65536)
def _unit_margins(K: int, h: int, alpha: float, delta: float) -> tuple[float, ...]:
    norm = SocialNorm(K, h)
    comply = np.ones(K + 1, dtype=bool)
    P = chain_matrix(K, h, comply, alpha)
    u = np.zeros(K + 1)
    u[h:] = 1.0
    w = np.linalg.solve(np.eye(K + 1) - delta * P, u)
    scale = delta * (1 - 2 * alpha)
    return tuple(scale * g for g in _deviation_gaps(w, norm).values())


def unit_margins(norm: SocialNorm, params: MarketParams) -> np.ndarray:
    """Deviation gains per unit of active reward, excluding the cost term.

    Compliant values are linear in the active reward, so the incentive
    margin at each active state is ``(lam p - c) * m - c`` with ``m`` from
    here.
    """
    return np.array(_unit_margins(norm.K, norm.h, float(params.alpha), float(params.delta)))


@lru_cache(maxsize=65536)
def _compliant_eta(K: int, h: int, alpha: float) -> tuple[float, ...]:
    P = chain_matrix(K, h, np.ones(K + 1, dtype=bool), alpha)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReducibleChainWarning)
        return tuple(stationary(P))


def compliant_active_fraction(norm: SocialNorm, alpha: float) -> float:
    """Active mass under compliance; cached, as it depends on (K, h, alpha) only."""
    return float(sum(_compliant_eta(norm.K, norm.h, float(alpha))[norm.h:]))


@lru_cache(maxsize=16384)
def _pure_chains(K: int, h: int, error: float, match_prob: float) -> tuple[np.ndarray, np.ndarray]:
    chains = (
        chain_matrix(K, h, np.ones(K + 1, dtype=bool), error, match_prob),
        chain_matrix(K, h, np.zeros(K + 1, dtype=bool), error, match_prob),
    )
    for P in chains:
        P.flags.writeable = False
    return chains


def policy_iteration(
    K: int,
    h: int,
    error: float,
    reward_comply: float,
    reward_deviate: float,
    delta: float,
    match_prob: float = 1.0,
    max_iter: int = 500,
) -> np.ndarray:
    """Optimal comply/deviate choice at each active state of a threshold norm.

    Rewards accrue only when the agent is matched.  Returns a boolean mask
    over ``0..K`` (True = comply); ties go to compliance.
    """
    if not delta < 1:
        raise ValueError("discount factor must be < 1")
    states = np.arange(K + 1)
    P_comply, P_deviate = _pure_chains(K, h, float(error), float(match_prob))
    u_comply = np.where(states >= h, match_prob * reward_comply, 0.0)
    u_deviate = np.where(states >= h, match_prob * reward_deviate, 0.0)
    policy = np.zeros(K + 1, dtype=bool)
    eye = np.eye(K + 1)
    for _ in range(max_iter):
        P = np.where(policy[:, None], P_comply, P_deviate)
        u = np.where(policy, u_comply, u_deviate)
        v = np.linalg.solve(eye - delta * P, u)
        better = u_comply + delta * (P_comply @ v) >= u_deviate + delta * (P_deviate @ v)
        better[:h] = False
        if np.array_equal(better, policy):
            return policy
        policy = better
    raise RuntimeError("policy iteration did not converge")


def best_response_policy(norm: SocialNorm, params: MarketParams) -> WorkerStrategy:
    """Discounted-utility-maximizing worker policy, by policy iteration.

    Isolated states are forced climbs; each active state chooses H or L.
    Ties go to H.
    """
    paid = params.lam * params.p
    mask = policy_iteration(norm.K, norm.h, params.alpha, paid - params.c, paid, params.delta)
    return WorkerStrategy.from_mask(norm, mask)
