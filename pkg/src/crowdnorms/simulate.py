"""Seeded agent-based simulation of the crowdsourcing market.

Each period every active worker is matched uniformly at random to a distinct
open task, acts, and is credited with a (possibly misperceived) outcome.

Random streams are split by role and agent index through
``SeedSequence(seed, spawn_key=(role, index))``: worker ``i`` always draws
its report errors from the same stream no matter how many other agents
exist, and the matching uses its own market stream.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import best_response_policy
from .model import MarketParams, SocialNorm, WorkerStrategy
from .strategic import strategic_policies

WORKER_STREAM = 0
MARKET_STREAM = 2
_BLOCK = 1024

WORKER_POLICIES = ("compliant", "best-response", "all-L")
REQUESTER_MODES = ("passive", "strategic")
REQUESTER_POLICIES = ("compliant", "best-response")


class ConfigError(ValueError):
    """Invalid simulation or sweep configuration; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SimConfig:
    params: MarketParams
    worker_norm: SocialNorm | None
    n_workers: int = 200
    n_requesters: int = 800
    periods: int = 10_000
    burn_in: int = 1_000
    seed: int = 0
    worker_policy: str | WorkerStrategy = "compliant"
    requester_mode: str = "passive"
    requester_norm: SocialNorm | None = None
    requester_policy: str = "compliant"
    delta_req: float = 0.5
    initial_reputation: int | None = None

    def __post_init__(self):
        if self.n_workers < 1:
            raise ConfigError("n_workers", "need at least one worker")
        if self.n_requesters < self.n_workers:
            raise ConfigError("n_requesters", "requesters must be at least as many as workers")
        if self.burn_in < 0 or self.periods <= self.burn_in:
            raise ConfigError("periods", "periods must exceed burn_in")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "seed must be a 64-bit unsigned integer")
        if self.requester_mode not in REQUESTER_MODES:
            raise ConfigError("requester_mode", f"expected one of {REQUESTER_MODES}")
        if self.requester_policy not in REQUESTER_POLICIES:
            raise ConfigError("requester_policy", f"expected one of {REQUESTER_POLICIES}")
        if not 0 <= self.delta_req < 1:
            raise ConfigError("delta_req", "must lie in [0, 1)")
        if isinstance(self.worker_policy, WorkerStrategy):
            if self.worker_norm is None or not self.worker_policy.fits(self.worker_norm):
                raise ConfigError("worker_policy", "strategy does not match the worker norm")
        elif self.worker_policy not in WORKER_POLICIES:
            raise ConfigError("worker_policy", f"expected one of {WORKER_POLICIES} or a WorkerStrategy")
        if self.requester_mode == "passive" and self.worker_norm is None:
            raise ConfigError("worker_norm", "passive-requester runs need a worker norm")
        if self.initial_reputation is not None:
            top = self.worker_norm.K if self.worker_norm else 0
            if not 0 <= self.initial_reputation <= top:
                raise ConfigError("initial_reputation", f"must lie in [0, {top}]")

    @property
    def T(self) -> float:
        return self.n_requesters / self.n_workers


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    reputation_dist: np.ndarray
    welfare: np.ndarray
    revenue: np.ndarray
    matches: np.ndarray
    high_effort: np.ndarray
    worker_utility: np.ndarray
    requester_utility: np.ndarray
    requester_dist: np.ndarray | None = None
    policies: dict = field(default_factory=dict)

    def _tail(self, trace: np.ndarray) -> np.ndarray:
        return trace[self.config.burn_in:]

    @property
    def welfare_per_worker(self) -> float:
        return float(self._tail(self.welfare).mean()) / self.config.n_workers

    @property
    def revenue_per_worker(self) -> float:
        return float(self._tail(self.revenue).mean()) / self.config.n_workers

    @property
    def normalized_welfare(self) -> float:
        """Per-worker welfare as a fraction of the Pareto bound ``V - c``."""
        p = self.config.params
        return self.welfare_per_worker / (p.V - p.c)

    def trace_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "welfare", "revenue", "matches", "high_effort"])
        for t in range(len(self.welfare)):
            w.writerow([t, _fmt(self.welfare[t]), _fmt(self.revenue[t]), int(self.matches[t]), int(self.high_effort[t])])
        return buf.getvalue()

    def distribution_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["reputation", "share"])
        for theta, share in enumerate(self.reputation_dist):
            w.writerow([theta, _fmt(share)])
        return buf.getvalue()

    def agents_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["role", "index", "discounted_utility"])
        for i, u in enumerate(self.worker_utility):
            w.writerow(["worker", i, _fmt(u)])
        for j, u in enumerate(self.requester_utility):
            w.writerow(["requester", j, _fmt(u)])
        return buf.getvalue()

    def write_csv(self, prefix: str | Path) -> list[Path]:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        out = []
        for name, text in (("trace", self.trace_csv()), ("reputation", self.distribution_csv()), ("agents", self.agents_csv())):
            path = prefix.with_name(f"{prefix.name}_{name}.csv")
            path.write_text(text, encoding="utf-8", newline="")
            out.append(path)
        return out


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


class _AgentNoise:
    """Per-agent uniform draws indexed by period, generated in blocks."""

    def __init__(self, seed: int, role: int, count: int):
        self.gens = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(role, i)))) for i in range(count)]
        self.block = np.empty((count, _BLOCK))
        self.start = -_BLOCK

    def at(self, t: int) -> np.ndarray:
        if t >= self.start + _BLOCK:
            self.start = t - t % _BLOCK
            for i, g in enumerate(self.gens):
                self.block[i] = g.random(_BLOCK)
        return self.block[:, t - self.start]


def _worker_mask(config: SimConfig) -> np.ndarray:
    norm = config.worker_norm
    policy = config.worker_policy
    if isinstance(policy, WorkerStrategy):
        return policy.high_mask()
    mask = np.zeros(norm.K + 1, dtype=bool)
    if policy == "compliant":
        mask[norm.h:] = True
    elif policy == "best-response":
        mask = best_response_policy(norm, config.params).high_mask()
    return mask


def _step(rep: np.ndarray, idx: np.ndarray, success: np.ndarray, h: int, K: int) -> None:
    """Apply the reputation scheme to matched active agents ``idx``."""
    cur = rep[idx]
    rep[idx] = np.where(success, np.minimum(K, cur + 1), np.where(cur > h, cur - 1, 0))


def run_simulation(config: SimConfig) -> SimResult:
    """Simulate the market; identical configs give bit-identical results."""
    params = config.params
    n_w, n_r = config.n_workers, config.n_requesters
    strategic = config.requester_mode == "strategic"

    w_norm = config.worker_norm
    r_norm = config.requester_norm if strategic else None
    if strategic:
        if isinstance(config.worker_policy, WorkerStrategy):
            pol = strategic_policies(params, w_norm, r_norm, n_w, n_r, config.delta_req, "compliant", config.requester_policy)
            high = config.worker_policy.high_mask()
        else:
            pol = strategic_policies(
                params, w_norm, r_norm, n_w, n_r, config.delta_req, config.worker_policy, config.requester_policy
            )
            high = pol.worker_high
        pays = pol.requester_pays
    else:
        high = _worker_mask(config)
        pays = None

    # an absent norm means nobody is ever isolated and the myopic action is played
    w_K, w_h = (w_norm.K, w_norm.h) if w_norm else (0, 0)
    r_K, r_h = (r_norm.K, r_norm.h) if r_norm else (0, 0)

    start = config.initial_reputation if config.initial_reputation is not None else w_h
    rep_w = np.full(n_w, start, dtype=np.int64)
    rep_r = np.full(n_r, r_h, dtype=np.int64)

    noise = _AgentNoise(config.seed, WORKER_STREAM, n_w)
    market = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed, spawn_key=(MARKET_STREAM,))))

    periods = config.periods
    welfare = np.zeros(periods)
    revenue = np.zeros(periods)
    matches = np.zeros(periods, dtype=np.int64)
    high_count = np.zeros(periods, dtype=np.int64)
    u_w = np.zeros(n_w)
    u_r = np.zeros(n_r)
    hist_w = np.zeros(w_K + 1)
    hist_r = np.zeros(r_K + 1) if r_norm else None
    disc_w = disc_r = 1.0

    paid_worker = params.lam * params.p
    fee = (1 - params.lam) * params.p

    for t in range(periods):
        if t >= config.burn_in:
            hist_w += np.bincount(rep_w, minlength=w_K + 1)
            if hist_r is not None:
                hist_r += np.bincount(rep_r, minlength=r_K + 1)

        active_w = np.flatnonzero(rep_w >= w_h)
        open_r = np.flatnonzero(rep_r >= r_h)
        n = min(len(active_w), len(open_r))
        if len(active_w) <= len(open_r):
            workers = active_w
            tasks = market.choice(open_r, size=n, replace=False)
        else:
            workers = market.choice(active_w, size=n, replace=False)
            tasks = market.permutation(open_r)
        draws = noise.at(t)

        effort = high[rep_w[workers]]
        pay = pays[rep_r[tasks]] if strategic else np.ones(n, dtype=bool)
        r_gain = np.where(effort, params.V, 0.0) - np.where(pay, params.p, 0.0)
        w_gain = np.where(pay, paid_worker, 0.0) - np.where(effort, params.c, 0.0)

        welfare[t] = r_gain.sum() + w_gain.sum()
        revenue[t] = fee * pay.sum()
        matches[t] = n
        high_count[t] = effort.sum()
        np.add.at(u_w, workers, disc_w * w_gain)
        np.add.at(u_r, tasks, disc_r * r_gain)
        disc_w *= params.delta
        disc_r *= config.delta_req

        solved = effort ^ (draws[workers] < params.alpha)
        isolated_w = rep_w < w_h
        if w_norm is not None:
            _step(rep_w, workers, solved, w_h, w_K)
            rep_w[isolated_w] += 1
        if r_norm is not None:
            isolated_r = rep_r < r_h
            _step(rep_r, tasks, pay, r_h, r_K)
            rep_r[isolated_r] += 1

    span = n_w * (periods - config.burn_in)
    return SimResult(
        config=config,
        reputation_dist=hist_w / span,
        welfare=welfare,
        revenue=revenue,
        matches=matches,
        high_effort=high_count,
        worker_utility=u_w,
        requester_utility=u_r,
        requester_dist=hist_r / (n_r * (periods - config.burn_in)) if hist_r is not None else None,
        policies={"worker_high": high, "requester_pays": pays},
    )


def simulate_strategic_requesters(config: SimConfig) -> SimResult:
    """Run with requesters choosing whether to pay; the full price goes to workers."""
    if config.requester_mode != "strategic":
        raise ConfigError("requester_mode", "strategic-requester runs need requester_mode='strategic'")
    if config.params.lam != 1:
        raise ConfigError("params.lam", "strategic-requester runs assume the worker receives the full price")
    return run_simulation(config)
