"""Price selection for markets with strategic requesters."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .design import DEFAULT_K_MAX
from .model import MarketParams
from .simulate import SimConfig, run_simulation
from .strategic import design_market

METHODS = ("analytic", "simulate")


@dataclass(frozen=True)
class PriceCurve:
    """Normalized welfare at each candidate price and the chosen optimum.

    ``p_star`` is the smallest price attaining the maximum, or None when
    no price yields positive welfare.
    """

    prices: np.ndarray
    welfare: np.ndarray
    p_star: float | None
    designs: tuple = ()

    @property
    def best_welfare(self) -> float:
        return float(self.welfare.max()) if len(self.welfare) else 0.0


def price_grid(lo: float = 0.05, hi: float = 10.0, step: float = 0.05) -> np.ndarray:
    """Evenly spaced prices, rounded so grid points are reproducible decimals."""
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 10)


def optimize_price(
    template: SimConfig | MarketParams,
    p_grid: Sequence[float],
    method: str = "analytic",
    n_workers: int = 200,
    n_requesters: int = 800,
    delta_req: float = 0.5,
    K_max: int = DEFAULT_K_MAX,
) -> PriceCurve:
    """Welfare-maximizing price over ``p_grid``.

    At each price both norms are redesigned.  ``analytic`` scores the
    mean-field welfare; ``simulate`` runs the template configuration (and
    its worker and requester policies) under the designed norms, reusing
    the template seed at every price so that designs which coincide score
    identically.  Prices where no pair of norms is sustainable score 0.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if isinstance(template, SimConfig):
        params = template.params
        n_workers, n_requesters, delta_req = template.n_workers, template.n_requesters, template.delta_req
    else:
        params = template
        if method == "simulate":
            raise ValueError("simulation needs a SimConfig template")
    prices = np.asarray(sorted(float(p) for p in p_grid))
    if len(prices) == 0:
        raise ValueError("empty price grid")
    if prices[0] <= 0:
        raise ValueError("prices must be positive")

    welfare = np.zeros(len(prices))
    designs = []
    for i, p in enumerate(prices):
        market = design_market(params.replace(p=float(p), lam=1.0), n_workers, n_requesters, delta_req, K_max)
        designs.append(market)
        if market.welfare <= 0:
            continue  # nobody pays, so nobody works
        if method == "analytic":
            welfare[i] = market.welfare
        else:
            cfg = replace(
                template,
                params=market.params,
                worker_norm=market.worker_norm,
                requester_norm=market.requester_norm,
                requester_mode="strategic",
                initial_reputation=None,
            )
            welfare[i] = max(0.0, run_simulation(cfg).normalized_welfare)
    top = welfare.max()
    p_star = float(prices[int(np.argmax(welfare))]) if top > 0 else None
    return PriceCurve(prices, welfare, p_star, tuple(designs))
