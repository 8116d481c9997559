"""Reputation-based incentive protocols for crowdsourcing markets."""

from .analytic import (
    IncentiveReport,
    ReducibleChainError,
    ReducibleChainWarning,
    best_response_policy,
    incentive_margins,
    social_welfare,
    solve_value_function,
    stationary_distribution,
)
from .design import (
    DesignResult,
    InfeasibleError,
    NonBracketingError,
    existence_thresholds,
    min_sharing_ratio,
    optimize_revenue,
    optimize_social_welfare,
)
from .model import Action, MarketParams, Report, SocialNorm, WorkerStrategy
from .pricing import optimize_price
from .simulate import ConfigError, SimConfig, SimResult, run_simulation, simulate_strategic_requesters

__all__ = [
    "Action", "ConfigError", "DesignResult", "IncentiveReport", "InfeasibleError", "MarketParams",
    "NonBracketingError", "ReducibleChainError", "ReducibleChainWarning", "Report", "SimConfig", "SimResult",
    "SocialNorm", "WorkerStrategy", "best_response_policy", "existence_thresholds", "incentive_margins",
    "min_sharing_ratio", "optimize_price", "optimize_revenue", "optimize_social_welfare", "run_simulation",
    "simulate_strategic_requesters", "social_welfare", "solve_value_function", "stationary_distribution",
]
