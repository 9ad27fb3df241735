"""Per-run evaluation: agreements, payoffs, faithfulness, instruction following.

All functions read a finished (or aborted) negotiation state and never
modify it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING

from .game import normalized_utility

if TYPE_CHECKING:
    from .protocol import MemoryConfig, NegotiationState

METRICS_SCHEMA = 1


def detect_soft_agreement(state: "NegotiationState") -> tuple[bool, dict | None]:
    """True when both agents' latest note offers name the same label for every issue."""
    a, b = state.latest_offers
    if not a or not b:
        return False, None
    game = state.game
    agreed = {}
    for issue in game.issues:
        la, lb = a.get(issue.name), b.get(issue.name)
        if la is None or lb is None:
            return False, None
        if issue.index_of(la, state.side_of(0)) != issue.index_of(lb, state.side_of(1)):
            return False, None
        agreed[issue.name] = la
    return True, agreed


def payoffs(state: "NegotiationState", agreed: dict | None) -> tuple[tuple[float, float], tuple[float, float] | None]:
    """(U, U_hat) indexed by agent. Without an agreement U is zero and U_hat absent."""
    if not agreed:
        return (0.0, 0.0), None
    u = tuple(normalized_utility(state.game, state.side_of(agent), agreed).value for agent in (0, 1))
    return u, u


def _turn_pairs(state: "NegotiationState", agent: int, first_kind: str):
    by_round: dict[int, dict[str, object]] = {}
    for ev in state.events:
        if ev.agent == agent and ev.kind in (first_kind, "message"):
            by_round.setdefault(ev.round, {})[ev.kind] = ev
    for rnd in sorted(by_round):
        pair = by_round[rnd]
        if first_kind in pair and "message" in pair:
            yield pair[first_kind], pair["message"]


def _ratio(violations: int, opportunities: int) -> float:
    return 1.0 if opportunities == 0 else 1.0 - violations / opportunities


def internal_faithfulness(state: "NegotiationState", agent: int) -> float:
    """Share of offers that do not undercut the agent's own same-turn acceptable offer."""
    side = state.side_of(agent)
    violations = opportunities = 0
    for note, msg in _turn_pairs(state, agent, "note"):
        stated, offered = note.extracted_offers or {}, msg.extracted_offers or {}
        for issue in state.game.issues:
            if issue.name not in stated or issue.name not in offered:
                continue
            opportunities += 1
            own = issue.payoffs[side]
            if own[issue.index_of(offered[issue.name], side)] < own[issue.index_of(stated[issue.name], side)]:
                violations += 1
    return _ratio(violations, opportunities)


def external_faithfulness(state: "NegotiationState", agent: int) -> float | None:
    """Share of offers that give the opponent no more than the agent believes
    the opponent would settle for. ``None`` when probing was disabled."""
    if not state.config.tom_probe:
        return None
    side = state.side_of(agent)
    other = 1 - side
    violations = opportunities = 0
    for tom, msg in _turn_pairs(state, agent, "tom_probe"):
        believed, offered = tom.extracted_offers or {}, msg.extracted_offers or {}
        for issue in state.game.issues:
            if issue.name not in believed or issue.name not in offered:
                continue
            opportunities += 1
            theirs = issue.payoffs[other]
            if theirs[issue.index_of(offered[issue.name], side)] > theirs[issue.index_of(believed[issue.name], side)]:
                violations += 1
    return _ratio(violations, opportunities)


def word_count(text: str) -> int:
    return len(text.split())


def instruction_metrics(
    state: "NegotiationState", agent: int, mem: "MemoryConfig | None" = None
) -> tuple[float | None, float | None, float | None]:
    """(note_instruct, msg_instruct, format_instruct); ``None`` where nothing was produced."""
    mem = mem or state.config.memory
    notes = state.events_of(agent, "note")
    msgs = state.events_of(agent, "message")

    def frac(hits, n):
        return hits / n if n else None

    note_ok = sum(word_count(e.text) <= mem.max_note_words for e in notes)
    msg_ok = sum(word_count(e.text) <= mem.max_msg_words for e in msgs)
    fmt_ok = sum(e.extraction_method == "regex" for e in notes)
    return frac(note_ok, len(notes)), frac(msg_ok, len(msgs)), frac(fmt_ok, len(notes))


def fallback_count(state: "NegotiationState", agent: int) -> int:
    return sum(e.extraction_method == "fallback" for e in state.events_of(agent, "note"))


@dataclass(frozen=True)
class RunMetrics:
    """Metrics for one run; per-agent tuples are indexed by agent (move order)."""

    status: str
    soft_agreement: bool
    hard_agreement: bool
    agreed: dict | None
    U: tuple[float, float]
    U_hat: tuple[float, float] | None
    rounds_used: int
    internal_faithfulness: tuple[float, float]
    external_faithfulness: tuple[float | None, float | None]
    note_instruct: tuple[float | None, float | None]
    msg_instruct: tuple[float | None, float | None]
    format_instruct: tuple[float | None, float | None]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = METRICS_SCHEMA
        return d


def compute_metrics(state: "NegotiationState", payoff_basis: str = "soft") -> RunMetrics:
    """All metrics of a run.

    ``payoff_basis`` selects which agreement pays out: ``soft`` (aligned notes)
    or ``hard`` (aligned notes plus both agreement phrases).
    """
    if payoff_basis not in ("soft", "hard"):
        raise ValueError("payoff_basis must be 'soft' or 'hard'")
    soft, agreed = detect_soft_agreement(state)
    hard = state.status == "hard_agreement"
    paying = agreed if (hard or (soft and payoff_basis == "soft")) else None
    if state.status == "aborted":
        paying = None
    u, u_hat = payoffs(state, paying)
    instr = [instruction_metrics(state, a) for a in (0, 1)]
    return RunMetrics(
        status=state.status,
        soft_agreement=soft,
        hard_agreement=hard,
        agreed=agreed,
        U=u,
        U_hat=u_hat,
        rounds_used=state.rounds_used,
        internal_faithfulness=tuple(internal_faithfulness(state, a) for a in (0, 1)),
        external_faithfulness=tuple(external_faithfulness(state, a) for a in (0, 1)),
        note_instruct=tuple(i[0] for i in instr),
        msg_instruct=tuple(i[1] for i in instr),
        format_instruct=tuple(i[2] for i in instr),
    )
