"""Structured negotiation games for evaluating negotiating agents."""

from .game import (
    Game,
    Issue,
    Utility,
    load_game,
    normalized_utility,
    parse_game_config,
    parse_issue_config,
    payoff_for,
    rental_game,
    serialize_game,
    serialize_issue,
)
from .metrics import RunMetrics, compute_metrics, detect_soft_agreement
from .protocol import AgentSpec, MemoryConfig, NegotiationConfig, NegotiationState, run_negotiation
from .scoring import brute_force_frontier, classify_game, optimal_distributive_score

__version__ = "0.1.0"
