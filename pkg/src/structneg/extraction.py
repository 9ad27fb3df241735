"""Offer extraction from notes and messages.

Stage one is deterministic pattern matching. When it leaves issues open, an
optional fallback extractor is consulted; its contract is::

    fallback(text, issue_names, vocabulary) -> {issue: label | None}

with ``vocabulary`` mapping each issue to its label list.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .game import Game, Issue

FallbackExtractor = Callable[[str, Sequence[str], Mapping[str, Sequence[str]]], Mapping[str, Optional[str]]]

CURRENCY_SYMBOLS = "$€£¥"
CURRENCY_WORDS = {"dollar", "dollars", "usd", "euro", "euros", "eur", "pound", "pounds", "gbp"}

_FENCED = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL | re.IGNORECASE)
_NUMBER = re.compile(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?")
_MENTION = re.compile(
    r"(?P<cur>[" + re.escape(CURRENCY_SYMBOLS) + r"])?\s?"
    r"(?P<num>\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?)"
    r"(?:[ \t]*(?P<unit>[A-Za-z]+))?"
)


@dataclass(frozen=True)
class ExtractionResult:
    offers: dict[str, str]
    method: str  # "regex" | "fallback" | "none"
    unresolved: tuple[str, ...] = field(default=())


def _norm(s: str) -> str:
    return " ".join(s.strip().lower().split())


def _singular(word: str) -> str:
    w = word.lower()
    return w[:-1] if w.endswith("s") and len(w) > 1 else w


def _label_number(label: str) -> float | None:
    m = _NUMBER.search(label)
    return float(m.group().replace(",", "")) if m else None


def _label_units(labels: Sequence[str]) -> tuple[set[str], bool]:
    units: set[str] = set()
    currency = False
    for lab in labels:
        if any(c in lab for c in CURRENCY_SYMBOLS):
            currency = True
        for tok in re.findall(r"[A-Za-z]+", lab):
            if tok.lower() in CURRENCY_WORDS:
                currency = True
            else:
                units.add(_singular(tok))
    return units, currency


def canonicalize_label(raw: str, issue: Issue, side: int) -> str | None:
    """Map free-form ``raw`` onto one of ``issue``'s labels for ``side``.

    Exact (case/whitespace-insensitive) matches win. Otherwise currency marks,
    thousands separators and the labels' own unit words are stripped and the
    remaining number compared to the labels' numbers. Nothing is rounded to the
    nearest grid value.
    """
    labels = issue.payoff_labels[side]
    key = _norm(str(raw))
    for lab in labels:
        if _norm(lab) == key:
            return lab
    units, has_currency = _label_units(labels)
    text = key
    raw_currency = any(c in text for c in CURRENCY_SYMBOLS)
    for c in CURRENCY_SYMBOLS:
        text = text.replace(c, " ")
    words = re.findall(r"[a-z]+", text)
    for w in words:
        if w in CURRENCY_WORDS:
            raw_currency = True
        elif _singular(w) not in units:
            return None
    if raw_currency and not has_currency:
        return None
    nums = _NUMBER.findall(text)
    if len(nums) != 1:
        return None
    value = float(nums[0].replace(",", ""))
    hits = [lab for lab in labels if _label_number(lab) == value]
    return hits[0] if len(hits) == 1 else None


def _issue_key(name: str) -> str:
    return re.sub(r"[\s_\-]+", "", name.lower())


def _parse_json_block(text: str) -> dict | None:
    blocks = _FENCED.findall(text)
    candidates = list(reversed(blocks))
    for blob in candidates:
        try:
            doc = json.loads(blob)
        except json.JSONDecodeError:
            continue
        if isinstance(doc, dict):
            return doc
    if not blocks:
        # bare object, no fence
        for m in reversed(list(re.finditer(r"\{[^{}]*\}", text, re.DOTALL))):
            try:
                doc = json.loads(m.group())
            except json.JSONDecodeError:
                continue
            if isinstance(doc, dict):
                return doc
    return None


def _vocabulary(game: Game, side: int) -> dict[str, list[str]]:
    return {i.name: list(i.payoff_labels[side]) for i in game.issues}


def _apply_fallback(
    text: str,
    game: Game,
    side: int,
    offers: dict[str, str],
    fallback: FallbackExtractor,
) -> ExtractionResult:
    residual = [n for n in game.issue_names if n not in offers]
    vocab = _vocabulary(game, side)
    got = fallback(text, residual, {n: vocab[n] for n in residual}) or {}
    merged = dict(offers)
    for name in residual:
        value = got.get(name)
        if value is None:
            continue
        label = canonicalize_label(str(value), game.issue(name), side)
        if label is not None:
            merged[name] = label
    unresolved = tuple(n for n in game.issue_names if n not in merged)
    return ExtractionResult(merged, "fallback", unresolved)


def extract_note_offers(
    note: str,
    game: Game,
    side: int,
    fallback: FallbackExtractor | None = None,
) -> ExtractionResult:
    """Read the acceptable-offer JSON block out of a note."""
    offers: dict[str, str] = {}
    doc = _parse_json_block(note or "")
    if doc is not None:
        keyed = {_issue_key(str(k)): v for k, v in doc.items()}
        for issue in game.issues:
            value = keyed.get(_issue_key(issue.name))
            if value is None or isinstance(value, (dict, list)):
                continue
            label = canonicalize_label(str(value), issue, side)
            if label is not None:
                offers[issue.name] = label
    if len(offers) == len(game.issues):
        return ExtractionResult(offers, "regex", ())
    if fallback is not None:
        return _apply_fallback(note or "", game, side, offers, fallback)
    return ExtractionResult(offers, "none", tuple(n for n in game.issue_names if n not in offers))


# -- free text ---------------------------------------------------------------

def _issue_name_spans(text: str, game: Game) -> list[tuple[int, int, str]]:
    spans = []
    for issue in game.issues:
        pat = r"\b" + r"[\s_\-]*".join(map(re.escape, re.split(r"[\s_\-]+", issue.name))) + r"\w*"
        for m in re.finditer(pat, text, re.IGNORECASE):
            spans.append((m.start(), m.end(), issue.name))
    return spans


def _mentions(text: str, game: Game, side: int) -> list[tuple[int, int, dict[str, str]]]:
    """Label mentions as (start, end, {issue: label}) for every compatible issue."""
    found: list[tuple[int, int, dict[str, str]]] = []
    for m in _MENTION.finditer(text):
        cur, num, unit = m.group("cur"), m.group("num"), m.group("unit")
        for with_unit in (True, False):
            if with_unit and not unit:
                continue
            raw = (cur or "") + num + (" " + unit if with_unit else "")
            # bare numbers need currency or a unit to count as an offer
            hits = {}
            for issue in game.issues:
                units, has_currency = _label_units(issue.payoff_labels[side])
                unit_ok = with_unit and (_singular(unit) in units or unit.lower() in CURRENCY_WORDS)
                if not (cur or unit_ok or (not units and not has_currency)):
                    continue
                label = canonicalize_label(raw, issue, side)
                if label is not None:
                    hits[issue.name] = label
            if hits:
                end = m.end() if with_unit else m.end("num")
                found.append((m.start(), end, hits))
                break
    for issue in game.issues:
        for lab in issue.payoff_labels[side]:
            if re.search(r"\d", lab):
                continue
            for m in re.finditer(r"(?<!\w)" + re.escape(lab) + r"(?!\w)", text, re.IGNORECASE):
                found.append((m.start(), m.end(), {issue.name: lab}))
    found.sort(key=lambda t: t[0])
    return found


def _attribute(start: int, end: int, hits: dict[str, str], names: list[tuple[int, int, str]]) -> str | None:
    if len(hits) == 1:
        return next(iter(hits))
    best, best_d = None, None
    for s, e, name in names:
        if name not in hits:
            continue
        # on a tie prefer the name written before the value ("rent: $500")
        d = (start - e, 0) if e <= start else (s - end, 1) if s >= end else (0, 0)
        if best_d is None or d < best_d:
            best, best_d = name, d
    return best


def extract_message_offers(
    message: str,
    game: Game,
    side: int,
    fallback: FallbackExtractor | None = None,
) -> ExtractionResult:
    """Scan a public message for label mentions; the last mention per issue wins.

    A value shared by several issues (``$500`` is both a rent and a deposit) is
    attributed to the nearest issue name in the text, or dropped if none.
    """
    text = message or ""
    names = _issue_name_spans(text, game)
    offers: dict[str, str] = {}
    for start, end, hits in _mentions(text, game, side):
        issue = _attribute(start, end, hits, names)
        if issue is not None:
            offers[issue] = hits[issue]
    if len(offers) < len(game.issues) and fallback is not None:
        return _apply_fallback(text, game, side, offers, fallback)
    unresolved = tuple(n for n in game.issue_names if n not in offers)
    return ExtractionResult(offers, "regex", unresolved)


# -- fallbacks -----------------------------------------------------------------

class SynonymFallback:
    """Rule-based fallback: lenient ``key: value`` scanning plus a synonym table.

    ``synonyms`` maps issue -> {phrase: label}. ``no <issue>`` phrases map to a
    zero-valued label by default.
    """

    def __init__(self, synonyms: Mapping[str, Mapping[str, str]] | None = None):
        self.synonyms = {k: dict(v) for k, v in (synonyms or {}).items()}
        self.calls = 0

    def __call__(self, text, issue_names, vocabulary):
        self.calls += 1
        out: dict[str, str | None] = {}
        lowered = text.lower()
        for name in issue_names:
            labels = list(vocabulary.get(name, ()))
            value = None
            kv = re.findall(
                r'"?' + re.escape(name) + r'"?\s*:\s*"?((?:[^",\n}]|(?<=\d),(?=\d))+?)"?\s*(?:,\s*\n|\n|,?\s*\}|$)',
                text,
                re.IGNORECASE,
            )
            if kv:
                value = kv[-1].strip()
                if value not in labels:
                    norm = _norm(value)
                    value = next((lab for lab in labels if _norm(lab) == norm), value)
            table = dict(self.synonyms.get(name, {}))
            zero = [lab for lab in labels if _label_number(lab) == 0]
            if zero:
                table.setdefault(f"no {name}", zero[0])
                stem = name[:-3] if name.endswith("ting") else name
                table.setdefault(f"no {stem}", zero[0])
            for phrase, label in table.items():
                if phrase.lower() in lowered:
                    value = label
            out[name] = value
        return out


LM_EXTRACTION_PROMPT = """Extract the offers stated in the text below.
Return only a JSON object mapping each issue name to exactly one of its allowed values, or null if the text makes no offer for it.

Example
Issues and allowed values: {{"subletting": ["0 days", "1 day", "2 days"]}}
Text: We cannot allow any subletting.
Answer: {{"subletting": "0 days"}}

Example
Issues and allowed values: {{"rent": ["$500", "$600", "$700"]}}
Text: I'd be willing to pay six hundred dollars per month.
Answer: {{"rent": "$600"}}

Issues and allowed values: {vocabulary}
Text: {text}
Answer:"""


class LmFallback:
    """Fallback backed by a chat-completion model (see ``agents.lm``)."""

    def __init__(self, backend, template: str = LM_EXTRACTION_PROMPT):
        self.backend = backend
        self.template = template

    def __call__(self, text, issue_names, vocabulary):
        prompt = self.template.format(
            vocabulary=json.dumps({n: list(vocabulary[n]) for n in issue_names}), text=text
        )
        reply = self.backend.complete([{"role": "user", "content": prompt}])
        m = re.search(r"\{.*\}", reply, re.DOTALL)
        if not m:
            return {}
        try:
            doc = json.loads(m.group())
        except json.JSONDecodeError:
            return {}
        return {n: doc.get(n) for n in issue_names if isinstance(doc, dict)}
