"""Search over protocol designs ``(K, h, lam)``.

The design space is small (465 norms for ``K_max = 30``), so every
optimizer enumerates it exhaustively.  Compliant values are linear in the
active reward, which lets the inner loops reuse cached per-norm unit
margins and active fractions instead of re-solving linear systems.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .analytic import (
    IncentiveReport,
    ReducibleChainWarning,
    stationary,
    transaction_surplus,
    best_response_policy,
    compliant_active_fraction,
    incentive_margins,
    unit_margins,
    _unit_margins,
)
from .model import MarketParams, SocialNorm, chain_matrix

DEFAULT_K_MAX = 30
DEFAULT_TOL = 1e-4


class InfeasibleError(ValueError):
    """No sharing ratio in [0, 1] satisfies the incentive constraints."""


class NonBracketingError(ValueError):
    """Both ends of a search interval give the same verdict."""


@dataclass(frozen=True)
class DesignResult:
    K: int
    h: int
    lam: float
    objective: float
    sustainable: bool
    margins: IncentiveReport | None = None

    @property
    def norm(self) -> SocialNorm | None:
        return SocialNorm(self.K, self.h) if self.sustainable else None

    @classmethod
    def sentinel(cls, lam: float = 1.0) -> "DesignResult":
        """No sustainable protocol: reported as ``K = h = 0`` with zero objective."""
        return cls(0, 0, lam, 0.0, False, None)


@dataclass(frozen=True)
class ThresholdProbe:
    """A located sustainability boundary along one axis.

    ``lower``/``upper`` bracket the flip; ``below`` is the verdict on the
    lower side.
    """

    axis: str
    value: float
    lower: float
    upper: float
    below: bool

    @property
    def width(self) -> float:
        return self.upper - self.lower


def norms(K_max: int) -> Iterator[SocialNorm]:
    for K in range(1, K_max + 1):
        for h in range(1, K + 1):
            yield SocialNorm(K, h)


def margins_fast(norm: SocialNorm, params: MarketParams) -> np.ndarray:
    """Incentive margins at ``h..K`` via reward linearity."""
    return (params.lam * params.p - params.c) * unit_margins(norm, params) - params.c


@lru_cache(maxsize=65536)
def _unit_range(K: int, h: int, alpha: float, delta: float) -> tuple[float, float]:
    m = _unit_margins(K, h, alpha, delta)
    return min(m), max(m)


def is_sustainable(norm: SocialNorm, params: MarketParams) -> bool:
    net = params.lam * params.p - params.c
    lo, hi = _unit_range(norm.K, norm.h, float(params.alpha), float(params.delta))
    # margins are net * m - c, so the binding state is the extreme m
    return net * (lo if net >= 0 else hi) - params.c >= 0


def _pick(candidates: list[tuple[float, SocialNorm, float]]) -> tuple[float, SocialNorm, float] | None:
    # objective desc, then h asc, then K desc
    if not candidates:
        return None
    return max(candidates, key=lambda t: (t[0], -t[1].h, t[1].K))


def optimize_social_welfare(params: MarketParams, K_max: int = DEFAULT_K_MAX) -> DesignResult:
    """Welfare-optimal sustainable norm with the full payment going to the worker."""
    if K_max < 1:
        raise ValueError("K_max must be at least 1")
    params = params.replace(lam=1.0)
    surplus = params.V - params.c
    found = []
    for norm in norms(K_max):
        if is_sustainable(norm, params):
            found.append((compliant_active_fraction(norm, params.alpha) * surplus, norm, 1.0))
    best = _pick(found)
    if best is None:
        return DesignResult.sentinel()
    welfare, norm, lam = best
    return DesignResult(norm.K, norm.h, lam, welfare, True, incentive_margins(norm, params))


def min_sharing_ratio(norm: SocialNorm, params: MarketParams) -> float:
    """Smallest ``lam`` meeting every incentive constraint of ``norm``.

    With unit-reward deviation gains ``m`` the binding constraint gives
    ``lam = (c / p) (1 + 1 / min m)``.
    """
    scale = params.delta * (1 - 2 * params.alpha)
    if not scale > 0:
        raise InfeasibleError("future reputation carries no weight (delta (1 - 2 alpha) <= 0)")
    m = float(unit_margins(norm, params).min())
    if not m > 0:
        raise InfeasibleError(f"norm {norm} gives no deviation gain at its bottleneck")
    lam = params.r * (1 + 1 / m)
    if lam > 1:
        raise InfeasibleError(f"norm {norm} needs lam = {lam:.6g} > 1")
    return lam


def optimize_revenue(params: MarketParams, K_max: int = DEFAULT_K_MAX) -> DesignResult:
    """Revenue-optimal sustainable protocol; each norm is paired with its minimum sharing ratio."""
    if K_max < 1:
        raise ValueError("K_max must be at least 1")
    found = []
    for norm in norms(K_max):
        try:
            lam = min_sharing_ratio(norm, params)
        except InfeasibleError:
            continue
        found.append((compliant_active_fraction(norm, params.alpha) * (1 - lam) * params.p, norm, lam))
    best = _pick(found)
    if best is None:
        return DesignResult.sentinel(lam=math.nan)
    rev, norm, lam = best
    return DesignResult(norm.K, norm.h, lam, rev, True, incentive_margins(norm, params.replace(lam=lam)))


def max_revenue_unconstrained(
    params: MarketParams,
    K_max: int = DEFAULT_K_MAX,
    lam_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
) -> float:
    """Best revenue over unsustainable protocols when workers best-respond."""
    if any(not 0 <= lam <= 1 for lam in lam_grid):
        raise ValueError("sharing ratios must lie in [0, 1]")
    best = 0.0
    for lam in lam_grid:
        if lam == 1:
            continue  # the website keeps nothing
        trial = params.replace(lam=lam)
        for norm in norms(K_max):
            if is_sustainable(norm, trial):
                continue
            mask = best_response_policy(norm, trial).high_mask()
            eta = _policy_eta(norm.K, norm.h, float(trial.alpha), tuple(mask.tolist()))
            best = max(best, float(eta[norm.h:].sum()) * (1 - lam) * trial.p)
    return best


@dataclass
class Frontier:
    """Sustainability table over ``1 <= h <= K <= K_max`` and its threshold structure."""

    table: np.ndarray
    h_bar: ThresholdProbe | None
    K_bar: ThresholdProbe | None
    violations: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.table.any()

    @property
    def monotone(self) -> bool:
        return not self.violations


def _flips(row: Sequence[bool]) -> int:
    return sum(a != b for a, b in zip(row, row[1:]))


def sustainability_frontier(params: MarketParams, K_max: int = DEFAULT_K_MAX) -> Frontier:
    """Scan ``h`` at each ``K`` and ``K`` at each ``h``; report the extreme sustainable values."""
    table = np.zeros((K_max + 1, K_max + 1), dtype=bool)
    for norm in norms(K_max):
        table[norm.K, norm.h] = is_sustainable(norm, params)
    violations = []
    for K in range(1, K_max + 1):
        row = list(table[K, 1:K + 1])
        if _flips(row) > 1:
            violations.append(f"h-scan at K={K} flips {_flips(row)} times")
    for h in range(1, K_max + 1):
        col = list(table[h:K_max + 1, h])
        if _flips(col) > 1:
            violations.append(f"K-scan at h={h} flips {_flips(col)} times")
    if not table.any():
        return Frontier(table, None, None, violations)
    Ks, hs = np.nonzero(table)
    h_min, K_max_s = int(hs.min()), int(Ks.max())
    h_bar = ThresholdProbe("h", h_min, h_min - 1, h_min, below=False)
    K_bar = ThresholdProbe("K", K_max_s, K_max_s, K_max_s + 1, below=True)
    return Frontier(table, h_bar, K_bar, violations)


@lru_cache(maxsize=4096)
def _best_bottleneck(alpha: float, delta: float, K_max: int, warning_window: bool) -> float:
    best = -math.inf
    for K in range(1, K_max + 1):
        for h in range(1, K + 1):
            if warning_window and h == K:
                continue
            best = max(best, min(_unit_margins(K, h, alpha, delta)))
    return best


def exists_sustainable(params: MarketParams, K_max: int = DEFAULT_K_MAX, warning_window: bool = False) -> bool:
    """Whether any norm with ``K <= K_max`` is sustainable at ``params.lam``.

    Margins grow with the bottleneck unit gain whenever ``lam p > c``, so
    only the norm with the largest bottleneck gain needs checking.
    ``warning_window`` restricts the family to ``h < K``.
    """
    net = params.lam * params.p - params.c
    if net <= 0:
        return False
    if warning_window and K_max < 2:
        return False
    m = _best_bottleneck(float(params.alpha), float(params.delta), K_max, warning_window)
    return net * m - params.c >= 0


def bisect_threshold(
    pred: Callable[[float], bool], lo: float, hi: float, tol: float = DEFAULT_TOL, axis: str = "x"
) -> ThresholdProbe:
    """Locate the single flip of a monotone predicate on ``[lo, hi]``."""
    below, above = pred(lo), pred(hi)
    if below == above:
        raise NonBracketingError(f"{axis}: both ends of [{lo}, {hi}] give {below}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid) == below:
            lo = mid
        else:
            hi = mid
    return ThresholdProbe(axis, 0.5 * (lo + hi), lo, hi, below)


AXES = ("r", "delta", "alpha")


def existence_thresholds(
    axis: str,
    params: MarketParams,
    tol: float = DEFAULT_TOL,
    K_max: int = DEFAULT_K_MAX,
    lam: float = 1.0,
    warning_window: bool = False,
    alpha_split: float | None = None,
) -> list[ThresholdProbe]:
    """Boundaries of the region where some sustainable protocol exists.

    ``r`` moves ``c`` at fixed ``p``.  The alpha axis returns the upper
    threshold, preceded by the lower one when existence fails at
    ``alpha = 0``; ``alpha_split`` is an interior point with existence
    (found by a grid scan if omitted).
    """
    params = params.replace(lam=lam)

    def exists(**kw) -> bool:
        return exists_sustainable(params.replace(**kw), K_max, warning_window)

    if axis == "r":
        eps = 1e-9
        return [bisect_threshold(lambda r: exists(c=r * params.p), eps, 1 - eps, tol, "r")]
    if axis == "delta":
        return [bisect_threshold(lambda d: exists(delta=d), 0.0, 1 - 1e-6, tol, "delta")]
    if axis != "alpha":
        raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")
    if alpha_split is None:
        grid = np.linspace(0, 0.5, 51)
        inside = [a for a in grid if exists(alpha=float(a))]
        if not inside:
            raise NonBracketingError("alpha: no sustainable protocol anywhere on [0, 1/2]")
        alpha_split = float(inside[len(inside) // 2])
    elif not exists(alpha=alpha_split):
        raise ValueError("alpha_split must lie inside the existence region")
    probes = [bisect_threshold(lambda a: exists(alpha=a), alpha_split, 0.5, tol, "alpha-upper")]
    if not exists(alpha=0.0):
        probes.insert(0, bisect_threshold(lambda a: exists(alpha=a), 0.0, alpha_split, tol, "alpha-lower"))
    return probes


@lru_cache(maxsize=65536)
def _policy_eta(K: int, h: int, alpha: float, mask: tuple[bool, ...]) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReducibleChainWarning)
        eta = stationary(chain_matrix(K, h, np.array(mask), alpha))
    eta.flags.writeable = False
    return eta


def welfare_under_best_response(norm: SocialNorm, params: MarketParams) -> float:
    """Stationary welfare when workers play their best response to ``norm``."""
    strategy = best_response_policy(norm, params)
    eta = _policy_eta(norm.K, norm.h, float(params.alpha), tuple(strategy.high_mask().tolist()))
    return float(eta @ transaction_surplus(norm, params, strategy))
