"""Deterministic negotiators used as offline oracles.

They concede over their own stated acceptable utility, so every metric has a
computable ground truth.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from ..game import Game, normalized_utility

FAMILIES = ("time_conceder", "never_concede", "greedy_compatible_mix")
EPS = 1e-12


@dataclass(frozen=True)
class ScriptedStrategy:
    family: str = "time_conceder"
    u_min: float = 0.5
    e: float = 1.0
    accept_margin: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown scripted family {self.family!r}")
        if not 0.0 <= self.u_min <= 1.0:
            raise ValueError("u_min must lie in [0, 1]")
        if self.e <= 0:
            raise ValueError("concession exponent must be positive")
        if self.accept_margin < 0:
            raise ValueError("accept_margin must be >= 0")


def scripted_target_utility(strategy: ScriptedStrategy, t: int, T: int) -> float:
    """Own utility the agent insists on in round ``t`` of ``T``.

    ``1 - (1 - u_min) * ((t - 1) / (T - 1)) ** (1 / e)``; ``e < 1`` concedes
    late (Boulware), ``e > 1`` early.
    """
    if T < 2:
        raise ValueError("concession needs at least two rounds")
    if not 1 <= t <= T:
        raise ValueError(f"round {t} outside 1..{T}")
    if strategy.family == "never_concede":
        return 1.0
    frac = (t - 1) / (T - 1)
    return 1.0 - (1.0 - strategy.u_min) * frac ** (1.0 / strategy.e)


def _estimated_opponent_utility(game: Game, side: int, idx: tuple[int, ...]) -> float:
    # Opponent's table is unknown: assume uniform weights, reversed payoffs on
    # distributive issues and shared payoffs on compatible ones.
    total = 0.0
    for issue, j in zip(game.issues, idx):
        own = issue.payoffs[side]
        lo, hi = min(own), max(own)
        rel = (own[j] - lo) / (hi - lo) if hi > lo else 1.0
        total += rel if issue.issue_type == "compatible" else 1.0 - rel
    return total / len(game.issues)


def _own_best_index(issue, side: int) -> int:
    own = issue.payoffs[side]
    return own.index(max(own))


def choose_offer(game: Game, side: int, target: float, strategy: ScriptedStrategy) -> dict[str, str]:
    """Allocation meeting ``target`` that concedes the most to the opponent.

    Among allocations with own utility >= target, maximize the estimated
    opponent utility, then prefer lower own utility. With no candidate the
    agent's own best allocation is returned.
    """
    ranges = []
    for issue in game.issues:
        if strategy.family == "greedy_compatible_mix" and issue.issue_type == "compatible":
            ranges.append([_own_best_index(issue, side)])
        else:
            ranges.append(range(issue.k))
    best_key, best_idx = None, None
    fallback_key, fallback_idx = None, None
    for idx in itertools.product(*ranges):
        alloc = {i.name: i.payoff_labels[side][j] for i, j in zip(game.issues, idx)}
        u = normalized_utility(game, side, alloc).value
        fk = (-u, idx)
        if fallback_key is None or fk < fallback_key:
            fallback_key, fallback_idx = fk, idx
        if u + EPS < target:
            continue
        key = (-_estimated_opponent_utility(game, side, idx), u, idx)
        if best_key is None or key < best_key:
            best_key, best_idx = key, idx
    idx = best_idx if best_idx is not None else fallback_idx
    return {i.name: i.payoff_labels[side][j] for i, j in zip(game.issues, idx)}


def offer_block(offer: dict[str, str]) -> str:
    body = ",\n".join(f"    {json.dumps(k)}: {json.dumps(v)}" for k, v in offer.items())
    return f"acceptable offer:\n```json{{\n{body}\n}}```"


def offer_phrase(offer: dict[str, str]) -> str:
    return ", ".join(f"{k}: {v}" for k, v in offer.items())


@dataclass(frozen=True)
class ScriptedTurn:
    target: float
    offer: dict[str, str]
    accepted: bool
    note: str
    message: str
    tom: str


def plan_turn(view, strategy: ScriptedStrategy) -> ScriptedTurn:
    game, side = view.game, view.side
    t, T = view.round, view.max_rounds
    target = scripted_target_utility(strategy, t, T)
    opp = view.opponent_offer or {}
    accepted = False
    if game.is_complete(opp):
        if normalized_utility(game, side, opp).value + EPS >= target - strategy.accept_margin:
            accepted = True
    offer = {n: opp[n] for n in game.issue_names} if accepted else choose_offer(game, side, target, strategy)
    note = (
        f"Round {t} of {T}. I need a total payoff of at least {target:.2f}. "
        + ("The partner's offer meets it." if accepted else "Offer the most I can give while meeting it.")
        + "\n\n"
        + offer_block(offer)
    )
    phrase = view.agreement_phrase
    if accepted:
        message = f"I accept your offer: {offer_phrase(offer)}. {phrase}"
    else:
        message = f"I propose {offer_phrase(offer)}."
        if t == T:
            # last chance: signal this is the offer to close on
            message += f" This is my final offer. {phrase}"
    tom_offer = {n: opp[n] for n in game.issue_names} if game.is_complete(opp) else offer
    tom = "My partner would settle for:\n\n" + offer_block(tom_offer)
    return ScriptedTurn(target, offer, accepted, note, message, tom)


def scripted_generate(view, strategy: ScriptedStrategy) -> tuple[str, str]:
    """(note, message) for the current turn."""
    turn = plan_turn(view, strategy)
    return turn.note, turn.message


class ScriptedAgent:
    """Backend wrapping a :class:`ScriptedStrategy`."""

    def __init__(self, strategy: ScriptedStrategy | None = None, **kwargs):
        self.strategy = strategy or ScriptedStrategy(**kwargs)

    def generate(self, kind: str, view) -> str:
        turn = plan_turn(view, self.strategy)
        if kind == "note":
            return turn.note
        if kind == "tom_probe":
            return turn.tom
        return turn.message

    def describe(self) -> dict:
        s = self.strategy
        return {"type": "scripted", "family": s.family, "u_min": s.u_min, "e": s.e,
                "accept_margin": s.accept_margin}
