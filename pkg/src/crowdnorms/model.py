"""Domain types and deterministic mechanics of a threshold social norm.

A worker carries a reputation in ``{0, ..., K}``.  Workers at or above the
threshold ``h`` are active and are expected to exert high effort; workers
below it are isolated and climb back one step per period.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class Action(enum.Enum):
    H = "H"
    L = "L"


class Report(enum.Enum):
    SOLVED = "solved"
    UNSOLVED = "unsolved"


@dataclass(frozen=True)
class MarketParams:
    """Intrinsic market parameters plus the payment sharing ratio.

    ``lam`` is the fraction of the price ``p`` paid to the worker; the
    website keeps ``(1 - lam) * p``.
    """

    p: float = 5.0
    c: float = 1.0
    V: float = 10.0
    delta: float = 0.8
    alpha: float = 0.1
    lam: float = 1.0

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if not 0 < self.c < self.V:
            raise ValueError(f"need 0 < c < V, got c={self.c}, V={self.V}")
        if not 0 <= self.lam <= 1:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        # alpha = 1/2 is admitted as the degenerate uninformative-report case
        if not 0 <= self.alpha <= 0.5:
            raise ValueError(f"alpha must lie in [0, 1/2], got {self.alpha}")

    @property
    def r(self) -> float:
        """Cost-to-price ratio ``c / p``."""
        return self.c / self.p

    def replace(self, **changes) -> "MarketParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SocialNorm:
    """Reputation ceiling ``K`` and social threshold ``h``."""

    K: int
    h: int

    def __post_init__(self):
        if not (isinstance(self.K, (int, np.integer)) and isinstance(self.h, (int, np.integer))):
            raise TypeError("K and h must be integers")
        if not 1 <= self.h <= self.K:
            raise ValueError(f"need 1 <= h <= K, got K={self.K}, h={self.h}")

    @property
    def states(self) -> range:
        return range(self.K + 1)

    @property
    def active_states(self) -> range:
        return range(self.h, self.K + 1)

    def is_active(self, theta: int) -> bool:
        self._check(theta)
        return theta >= self.h

    def _check(self, theta: int) -> None:
        if not 0 <= theta <= self.K:
            raise ValueError(f"reputation {theta} outside [0, {self.K}]")


@dataclass(frozen=True)
class WorkerStrategy:
    """An action for every active reputation ``h, ..., K``.

    Isolated states carry no action.
    """

    h: int
    actions: tuple[Action, ...]

    def __post_init__(self):
        if len(self.actions) == 0:
            raise ValueError("strategy must cover at least one active state")
        if any(not isinstance(a, Action) for a in self.actions):
            raise TypeError("actions must be Action members")

    @property
    def K(self) -> int:
        return self.h + len(self.actions) - 1

    def __getitem__(self, theta: int) -> Action:
        if not self.h <= theta <= self.K:
            raise KeyError(f"no action defined at reputation {theta}")
        return self.actions[theta - self.h]

    def items(self) -> Iterable[tuple[int, Action]]:
        return zip(range(self.h, self.K + 1), self.actions)

    def fits(self, norm: SocialNorm) -> bool:
        return self.h == norm.h and self.K == norm.K

    def high_mask(self) -> np.ndarray:
        """Boolean array over ``0..K``; True where the strategy plays H."""
        mask = np.zeros(self.K + 1, dtype=bool)
        mask[self.h:] = [a is Action.H for a in self.actions]
        return mask

    @classmethod
    def compliant(cls, norm: SocialNorm) -> "WorkerStrategy":
        return cls(norm.h, (Action.H,) * (norm.K - norm.h + 1))

    @classmethod
    def uniform(cls, norm: SocialNorm, action: Action) -> "WorkerStrategy":
        return cls(norm.h, (action,) * (norm.K - norm.h + 1))

    @classmethod
    def from_mask(cls, norm: SocialNorm, mask: Sequence[bool]) -> "WorkerStrategy":
        if len(mask) != norm.K + 1:
            raise ValueError("mask must cover every reputation 0..K")
        return cls(norm.h, tuple(Action.H if m else Action.L for m in mask[norm.h:]))

    def is_compliant(self) -> bool:
        return all(a is Action.H for a in self.actions)


def social_strategy(theta: int, norm: SocialNorm) -> Action:
    """Prescribed action: H for active workers, L for isolated ones."""
    norm._check(theta)
    return Action.H if theta >= norm.h else Action.L


def reputation_update(theta: int, report: Report, norm: SocialNorm) -> int:
    norm._check(theta)
    if theta < norm.h:
        return theta + 1
    if report is Report.SOLVED:
        return min(norm.K, theta + 1)
    return theta - 1 if theta > norm.h else 0


def stage_payoffs(action: Action, params: MarketParams) -> tuple[float, float]:
    """(requester, worker) utilities of one transaction."""
    paid = params.lam * params.p
    if action is Action.H:
        return params.V - params.p, paid - params.c
    return -params.p, paid


def chain_matrix(K: int, h: int, comply: np.ndarray, error: float, match_prob: float = 1.0) -> np.ndarray:
    """Reputation transition matrix for a threshold norm.

    ``comply[theta]`` selects the prescribed action at active states.  An
    active agent transacts with probability ``match_prob``; the outcome it
    is credited with is flipped with probability ``error``.  Unmatched
    active agents keep their reputation; isolated agents climb by one.
    """
    P = np.zeros((K + 1, K + 1))
    for theta in range(h):
        P[theta, theta + 1] = 1.0
    for theta in range(h, K + 1):
        up = min(K, theta + 1)
        down = theta - 1 if theta > h else 0
        p_up = 1.0 - error if comply[theta] else error
        P[theta, up] += match_prob * p_up
        P[theta, down] += match_prob * (1.0 - p_up)
        P[theta, theta] += 1.0 - match_prob
    return P


def transition_matrix(norm: SocialNorm, params: MarketParams, strategy: WorkerStrategy | None = None) -> np.ndarray:
    """Row-stochastic worker reputation chain under ``strategy``.

    Defaults to the compliant strategy.  Playing L at an active state swaps
    the up/down probabilities.
    """
    if strategy is None:
        strategy = WorkerStrategy.compliant(norm)
    if not strategy.fits(norm):
        raise ValueError("strategy does not cover the norm's active states")
    return chain_matrix(norm.K, norm.h, strategy.high_mask(), params.alpha)
