"""Turn protocol: note -> (theory-of-mind probe) -> message, alternating agents.

A round is both agents completing one turn. Agent 0 always moves first within
a round; callers decide which player is agent 0.
"""

from __future__ import annotations

import json
import logging
import random
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Callable, Protocol, Sequence

from . import prompts
from .extraction import FallbackExtractor, extract_message_offers, extract_note_offers
from .game import Game, game_to_dict
from .metrics import detect_soft_agreement

logger = logging.getLogger(__name__)

TRANSCRIPT_SCHEMA = 1
WINDOW_VALUES = (0, 1, -1)
SEPARATOR = "=" * 70


class NegotiationOver(RuntimeError):
    """Raised when advancing a negotiation that already reached a terminal status."""


@dataclass(frozen=True)
class MemoryConfig:
    """History windows and output limits.

    Each window is 0 (nothing), 1 (most recent item) or -1 (everything).
    """

    notes_for_note: int = 0
    messages_for_note: int = -1
    notes_for_message: int = 1
    messages_for_message: int = -1
    max_note_words: int = 64
    max_msg_words: int = 64
    show_round_numbers: bool = True
    format: str = "transcript"

    def __post_init__(self):
        for name in ("notes_for_note", "messages_for_note", "notes_for_message", "messages_for_message"):
            if getattr(self, name) not in WINDOW_VALUES:
                raise ValueError(f"{name} must be one of {WINDOW_VALUES}")
        if self.max_note_words < 1 or self.max_msg_words < 1:
            raise ValueError("word limits must be positive")
        if self.format not in ("transcript", "dialogue"):
            raise ValueError(f"unknown format {self.format!r}")


@dataclass(frozen=True)
class NegotiationConfig:
    max_rounds: int = 10
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    tom_probe: bool = True
    max_attempts: int = 3
    agreement_phrase: str = prompts.AGREEMENT_PHRASE
    tom_prompt: str = prompts.TOM_PROMPT

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class TurnEvent:
    round: int
    agent: int
    kind: str  # "note" | "message" | "tom_probe"
    text: str
    extracted_offers: dict | None = None
    extraction_method: str = "none"
    unresolved: tuple[str, ...] = ()
    started: float | None = None
    finished: float | None = None


@dataclass(frozen=True)
class Context:
    """Everything an agent is shown for one generation step."""

    kind: str
    agent: int
    initialization: str
    history: tuple[TurnEvent, ...]
    instruction: str
    banner: str | None = None

    @property
    def text(self) -> str:
        parts = [self.initialization, "<transcript>"]
        for ev in self.history:
            parts.append(render_event(ev))
        parts.append("</transcript>")
        if self.banner:
            parts.append(self.banner)
        parts.append(self.instruction)
        return "\n\n".join(parts)

    def __str__(self) -> str:
        return self.text


def render_event(ev: TurnEvent) -> str:
    tag = {"note": "note", "message": "msg", "tom_probe": "tom"}[ev.kind]
    return f"<round: {ev.round}, agent: {ev.agent}>\n    [{tag}]\n{ev.text}\n{SEPARATOR}"


@dataclass(frozen=True)
class AgentView:
    """Read-only slice of the negotiation handed to a backend."""

    game: Game
    agent: int
    side: int
    round: int
    max_rounds: int
    kind: str
    context: Context
    own_offer: dict | None
    opponent_offer: dict | None
    rng: random.Random
    agreement_phrase: str


class Backend(Protocol):
    def generate(self, kind: str, view: AgentView) -> str: ...


@dataclass
class AgentSpec:
    agent_id: str
    side: int
    backend: Backend
    persona: str | None = None
    visibility_level: int = 1

    def __post_init__(self):
        if self.side not in (0, 1):
            raise ValueError("side must be 0 or 1")
        if self.visibility_level not in (1, 2, 3):
            raise ValueError("visibility_level must be 1, 2 or 3")


@dataclass
class NegotiationState:
    game: Game
    agents: tuple[AgentSpec, AgentSpec]
    config: NegotiationConfig = field(default_factory=NegotiationConfig)
    fallback: FallbackExtractor | None = None
    seed: int = 0
    events: list[TurnEvent] = field(default_factory=list)
    latest_offers: list[dict | None] = field(default_factory=lambda: [None, None])
    latest_tom: list[dict | None] = field(default_factory=lambda: [None, None])
    latest_message_offers: list[dict | None] = field(default_factory=lambda: [None, None])
    status: str = "in_progress"  # in_progress | hard_agreement | no_agreement | aborted
    round: int = 1
    turn: int = 0
    error: str | None = None
    phrase_only: list[int] = field(default_factory=list)
    clock: Callable[[], float] | None = None

    def __post_init__(self):
        if len(self.agents) != 2 or {a.side for a in self.agents} != {0, 1}:
            raise ValueError("two agents bound to distinct sides are required")
        self._rngs = [random.Random(f"{self.seed}:{i}") for i in (0, 1)]

    @property
    def terminal(self) -> bool:
        return self.status != "in_progress"

    def side_of(self, agent: int) -> int:
        return self.agents[agent].side

    def events_of(self, agent: int, kind: str) -> list[TurnEvent]:
        return [e for e in self.events if e.agent == agent and e.kind == kind]

    @property
    def rounds_used(self) -> int:
        if self.status == "no_agreement":
            return self.config.max_rounds
        last = max((e.round for e in self.events), default=0)
        return last


def _window(items: list, w: int) -> list:
    if w == 0:
        return []
    if w == -1:
        return list(items)
    return list(items[-w:])


def _history(state: NegotiationState, agent: int, note_w: int, msg_w: int, include_current_note: bool) -> tuple:
    messages = [e for e in state.events if e.kind == "message"]
    notes = state.events_of(agent, "note")
    if not include_current_note:
        notes = [e for e in notes if e.round < state.round]
    chosen = {id(e) for e in _window(messages, msg_w)} | {id(e) for e in _window(notes, note_w)}
    return tuple(e for e in state.events if id(e) in chosen)


def _initialization(state: NegotiationState, agent: int) -> str:
    spec = state.agents[agent]
    other = state.agents[1 - agent]
    return prompts.render_initialization(
        state.game,
        spec.side,
        agent,
        visibility_level=spec.visibility_level,
        ability=spec.persona,
        opponent_ability=other.persona,
        phrase=state.config.agreement_phrase,
    )


def _banner(state: NegotiationState, mem: MemoryConfig) -> str | None:
    if not mem.show_round_numbers:
        return None
    return prompts.round_banner(state.round, state.config.max_rounds)


def assemble_note_context(state: NegotiationState, agent: int, mem: MemoryConfig | None = None) -> Context:
    mem = mem or state.config.memory
    instruction = (
        prompts.NOTE_PROMPT.format(max_len=mem.max_note_words)
        + "\n\n"
        + prompts.OFFER_FORMAT_INTRO
        + "\n\n"
        + prompts.offer_format_block(state.game.issue_names)
    )
    return Context(
        "note",
        agent,
        _initialization(state, agent),
        _history(state, agent, mem.notes_for_note, mem.messages_for_note, False),
        instruction,
        _banner(state, mem),
    )


def assemble_message_context(state: NegotiationState, agent: int, mem: MemoryConfig | None = None) -> Context:
    mem = mem or state.config.memory
    return Context(
        "message",
        agent,
        _initialization(state, agent),
        _history(state, agent, mem.notes_for_message, mem.messages_for_message, True),
        prompts.MESSAGE_PROMPT.format(max_len=mem.max_msg_words),
        _banner(state, mem),
    )


def assemble_tom_context(state: NegotiationState, agent: int, mem: MemoryConfig | None = None) -> Context:
    mem = mem or state.config.memory
    opponent = state.game.parties[state.side_of(1 - agent)]
    instruction = (
        state.config.tom_prompt.format(opponent=opponent)
        + "\n\n"
        + prompts.offer_format_block(state.game.issue_names)
    )
    return Context(
        "tom_probe",
        agent,
        _initialization(state, agent),
        _history(state, agent, mem.notes_for_message, mem.messages_for_message, True),
        instruction,
        _banner(state, mem),
    )


_PUNCT = re.compile(r"[^\w\s]")


def _normalize_phrase(text: str) -> str:
    return " ".join(_PUNCT.sub(" ", text.lower()).split())


def contains_phrase(text: str, phrase: str = prompts.AGREEMENT_PHRASE) -> bool:
    return _normalize_phrase(phrase) in _normalize_phrase(text or "")


def _generate(state: NegotiationState, backend: Backend, view: AgentView) -> str:
    last: Exception | None = None
    for attempt in range(state.config.max_attempts):
        try:
            return backend.generate(view.kind, view)
        except Exception as exc:  # backend failures of any kind are retried
            last = exc
            logger.warning("backend failed on %s (attempt %d/%d): %r", view.kind, attempt + 1,
                           state.config.max_attempts, exc)
    raise BackendFailure(repr(last)) from last


class BackendFailure(RuntimeError):
    pass


def _now(state: NegotiationState) -> float | None:
    return state.clock() if state.clock else None


def _view(state: NegotiationState, agent: int, kind: str, ctx: Context) -> AgentView:
    return AgentView(
        game=state.game,
        agent=agent,
        side=state.side_of(agent),
        round=state.round,
        max_rounds=state.config.max_rounds,
        kind=kind,
        context=ctx,
        own_offer=state.latest_offers[agent],
        opponent_offer=state.latest_message_offers[1 - agent],
        rng=state._rngs[agent],
        agreement_phrase=state.config.agreement_phrase,
    )


def advance_turn(state: NegotiationState, backend: Backend | None = None) -> NegotiationState:
    """Play the current agent's turn, then move the pointer and check completion.

    A backend that keeps failing after ``config.max_attempts`` tries marks the
    run ``aborted``.
    """
    if state.terminal:
        raise NegotiationOver(f"negotiation already {state.status}")
    agent = state.turn
    side = state.side_of(agent)
    backend = backend or state.agents[agent].backend
    game = state.game
    try:
        t0 = _now(state)
        ctx = assemble_note_context(state, agent)
        note = _generate(state, backend, _view(state, agent, "note", ctx))
        res = extract_note_offers(note, game, side, state.fallback)
        state.events.append(TurnEvent(state.round, agent, "note", note, dict(res.offers),
                                      res.method, res.unresolved, t0, _now(state)))
        state.latest_offers[agent] = dict(res.offers)

        if state.config.tom_probe:
            t0 = _now(state)
            ctx = assemble_tom_context(state, agent)
            tom = _generate(state, backend, _view(state, agent, "tom_probe", ctx))
            res = extract_note_offers(tom, game, side, state.fallback)
            state.events.append(TurnEvent(state.round, agent, "tom_probe", tom, dict(res.offers),
                                          res.method, res.unresolved, t0, _now(state)))
            state.latest_tom[agent] = dict(res.offers)

        t0 = _now(state)
        ctx = assemble_message_context(state, agent)
        msg = _generate(state, backend, _view(state, agent, "message", ctx))
        res = extract_message_offers(msg, game, side, None)
        state.events.append(TurnEvent(state.round, agent, "message", msg, dict(res.offers),
                                      res.method, res.unresolved, t0, _now(state)))
        state.latest_message_offers[agent] = dict(res.offers)
    except BackendFailure as exc:
        state.status = "aborted"
        state.error = str(exc)
        return state

    if agent == 1:
        state.turn = 0
        state.round += 1
    else:
        state.turn = 1
    check_completion(state)
    return state


def check_completion(state: NegotiationState, max_rounds: int | None = None) -> str:
    """Update and return the status after a message.

    Hard agreement needs both agents' latest messages to carry the agreement
    phrase and their latest notes to agree on every issue.
    """
    if state.terminal:
        return state.status
    max_rounds = state.config.max_rounds if max_rounds is None else max_rounds
    latest = [None, None]
    for ev in state.events:
        if ev.kind == "message":
            latest[ev.agent] = ev
    if all(latest) and all(contains_phrase(ev.text, state.config.agreement_phrase) for ev in latest):
        agreed, _ = detect_soft_agreement(state)
        if agreed:
            state.status = "hard_agreement"
            return state.status
        last_round = max(ev.round for ev in latest)
        if last_round not in state.phrase_only:
            state.phrase_only.append(last_round)
            logger.info("agreement phrase without matching notes in round %d", last_round)
    if state.round > max_rounds:
        state.status = "no_agreement"
    return state.status


def _transcript_header(state: NegotiationState, run_id: str) -> dict:
    return {
        "record": "header",
        "schema": TRANSCRIPT_SCHEMA,
        "run_id": run_id,
        "seed": state.seed,
        "config": asdict(state.config),
        "game": game_to_dict(state.game, inline_issues=True),
        "agents": [
            {"agent": i, "agent_id": a.agent_id, "side": a.side, "persona": a.persona,
             "visibility_level": a.visibility_level, "backend": describe_backend(a.backend)}
            for i, a in enumerate(state.agents)
        ],
    }


def describe_backend(backend) -> dict:
    describe = getattr(backend, "describe", None)
    return describe() if callable(describe) else {"type": type(backend).__name__}


def event_record(run_id: str, ev: TurnEvent) -> dict:
    return {
        "record": "event",
        "run_id": run_id,
        "round": ev.round,
        "agent": ev.agent,
        "kind": ev.kind,
        "text": ev.text,
        "extracted_offers": ev.extracted_offers,
        "extraction_method": ev.extraction_method,
        "timestamps": {"started": ev.started, "finished": ev.finished},
    }


def transcript_records(state: NegotiationState, run_id: str) -> list[dict]:
    records = [_transcript_header(state, run_id)]
    records.extend(event_record(run_id, ev) for ev in state.events)
    records.append({"record": "footer", "run_id": run_id, "status": state.status,
                    "rounds_used": state.rounds_used, "error": state.error,
                    "phrase_only_rounds": list(state.phrase_only)})
    return records


def write_jsonl(records: Sequence[dict], out: str | Path | IO[str], append: bool = True) -> None:
    lines = "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records)
    if hasattr(out, "write"):
        out.write(lines)
        return
    with open(out, "a" if append else "w", encoding="utf-8") as fh:
        fh.write(lines)


def run_negotiation(
    game: Game,
    agents: Sequence[AgentSpec],
    config: NegotiationConfig | None = None,
    seed: int = 0,
    *,
    starter: int = 0,
    fallback: FallbackExtractor | None = None,
    run_id: str | None = None,
    transcript: str | Path | IO[str] | None = None,
    clock: Callable[[], float] | None = time.time,
) -> tuple[NegotiationState, list[dict]]:
    """Play a full negotiation. ``agents[starter]`` moves first and becomes agent 0."""
    agents = tuple(agents)
    if starter == 1:
        agents = (agents[1], agents[0])
    state = NegotiationState(game, agents, config or NegotiationConfig(), fallback, seed, clock=clock)
    while not state.terminal:
        advance_turn(state)
    run_id = run_id or f"{game.name}-s{seed}"
    records = transcript_records(state, run_id)
    if transcript is not None:
        write_jsonl(records, transcript)
    return state, records
