"""Games, issues, payoff tables and normalized utility.

Issues and games are read from YAML documents with the key layout::

    name: rent
    issue_type: distributive
    descriptions: [...]   # one entry per side
    payoffs: [[...], [...]]
    payoff_labels: [[...], [...]]

Game documents carry ``name``, ``description``, ``sides`` and ``parties`` and
may add ``issues`` (names or inline issue mappings) and ``weights``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

import yaml

ISSUE_TYPES = ("distributive", "compatible")
WEIGHT_TOL = 1e-9

Allocation = Mapping[str, str]
"""Issue name -> chosen label. May be partial."""


class ConfigError(ValueError):
    """A game or issue document failed validation."""


class UnknownLabel(KeyError):
    """A label is not part of an issue's payoff table."""


def _strictly_increasing(xs: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


def _strictly_decreasing(xs: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _direction(xs: Sequence[float]) -> int:
    """+1 non-decreasing, -1 non-increasing, 0 constant, None if neither."""
    up = all(b >= a for a, b in zip(xs, xs[1:]))
    down = all(b <= a for a, b in zip(xs, xs[1:]))
    if up and down:
        return 0
    if up:
        return 1
    if down:
        return -1
    return None


@dataclass(frozen=True)
class Issue:
    """One negotiable dimension with a discrete value grid.

    ``payoffs[s][j]`` is what side ``s`` earns if the issue settles on label
    index ``j``. Label lists are index-aligned across sides.
    """

    name: str
    issue_type: str
    descriptions: tuple[str, str]
    payoffs: tuple[tuple[float, ...], tuple[float, ...]]
    payoff_labels: tuple[tuple[str, ...], tuple[str, ...]]

    def __post_init__(self):
        if self.issue_type not in ISSUE_TYPES:
            raise ConfigError(f"{self.name}: unknown issue_type {self.issue_type!r}")
        if len(self.descriptions) != 2 or len(self.payoffs) != 2 or len(self.payoff_labels) != 2:
            raise ConfigError(f"{self.name}: expected exactly two sides")
        k = len(self.payoffs[0])
        lengths = {len(self.payoffs[0]), len(self.payoffs[1]),
                   len(self.payoff_labels[0]), len(self.payoff_labels[1])}
        if len(lengths) != 1:
            raise ConfigError(
                f"{self.name}: length mismatch between payoffs and payoff_labels "
                f"({[len(p) for p in self.payoffs]} vs {[len(p) for p in self.payoff_labels]})"
            )
        if k < 2:
            raise ConfigError(f"{self.name}: need at least two values")
        for side in (0, 1):
            p = self.payoffs[side]
            if not all(math.isfinite(v) and v >= 0 for v in p):
                raise ConfigError(f"{self.name}: payoffs must be finite and non-negative")
            if max(p) <= 0:
                raise ConfigError(f"{self.name}: side {side} has no positive payoff")
            if len(set(self.payoff_labels[side])) != k:
                raise ConfigError(f"{self.name}: duplicate labels for side {side}")
        p0, p1 = self.payoffs
        if self.issue_type == "distributive":
            opposed = (_strictly_increasing(p0) and _strictly_decreasing(p1)) or (
                _strictly_decreasing(p0) and _strictly_increasing(p1)
            )
            if not opposed:
                raise ConfigError(f"{self.name}: distributive payoffs must move in opposite directions")
        else:
            d0, d1 = _direction(p0), _direction(p1)
            if d0 is None or d1 is None or d0 * d1 < 0 or (d0 == 0 and d1 == 0):
                raise ConfigError(f"{self.name}: compatible payoffs must share a monotonic direction")

    @property
    def k(self) -> int:
        return len(self.payoffs[0])

    def labels(self, side: int) -> tuple[str, ...]:
        return self.payoff_labels[side]

    def max_payoff(self, side: int) -> float:
        return max(self.payoffs[side])

    def index_of(self, label: str, side: int) -> int:
        """Index of ``label``, looked up in ``side``'s labels then the other side's."""
        for s in (side, 1 - side):
            try:
                return self.payoff_labels[s].index(label)
            except ValueError:
                continue
        raise UnknownLabel(f"{label!r} is not a value of issue {self.name!r}")

    def has_label(self, label: str) -> bool:
        return label in self.payoff_labels[0] or label in self.payoff_labels[1]

    def normalized(self, side: int, index: int) -> float:
        return self.payoffs[side][index] / self.max_payoff(side)


@dataclass(frozen=True)
class Game:
    name: str
    description: str
    sides: tuple[str, str]
    parties: tuple[str, str]
    issues: tuple[Issue, ...]
    weights: tuple[tuple[float, ...], tuple[float, ...]]

    def __post_init__(self):
        if len(self.sides) != 2 or len(self.parties) != 2 or len(self.weights) != 2:
            raise ConfigError(f"{self.name}: a game has exactly two sides")
        if not self.issues:
            raise ConfigError(f"{self.name}: no issues")
        names = [i.name for i in self.issues]
        if len(set(names)) != len(names):
            raise ConfigError(f"{self.name}: duplicate issue names {names}")
        for side, w in enumerate(self.weights):
            if len(w) != len(self.issues):
                raise ConfigError(f"{self.name}: side {side} has {len(w)} weights for {len(names)} issues")
            if any(x < 0 or not math.isfinite(x) for x in w):
                raise ConfigError(f"{self.name}: weights must be non-negative")
            if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
                raise ConfigError(f"{self.name}: side {side} weights sum to {math.fsum(w)}, not 1")

    @property
    def issue_names(self) -> tuple[str, ...]:
        return tuple(i.name for i in self.issues)

    def issue(self, name: str) -> Issue:
        for i in self.issues:
            if i.name == name:
                return i
        raise KeyError(name)

    @property
    def is_integrative(self) -> bool:
        return any(abs(a - b) > WEIGHT_TOL for a, b in zip(*self.weights))

    def is_complete(self, alloc: Allocation) -> bool:
        return all(name in alloc for name in self.issue_names)


class Utility(NamedTuple):
    value: float
    partial: bool


def payoff_for(issue: Issue, side: int, label: str) -> float:
    try:
        j = issue.payoff_labels[side].index(label)
    except ValueError:
        raise UnknownLabel(f"{label!r} is not a value of issue {issue.name!r}") from None
    return issue.payoffs[side][j]


def normalized_utility(game: Game, side: int, alloc: Allocation) -> Utility:
    """Weighted, per-issue max-normalized payoff of ``alloc`` for ``side``.

    Partial allocations are worth nothing; the result is flagged ``partial``.
    """
    for name, label in alloc.items():
        if not game.issue(name).has_label(label):
            raise UnknownLabel(f"{label!r} is not a value of issue {name!r}")
    if not game.is_complete(alloc):
        return Utility(0.0, True)
    terms = []
    for w, issue in zip(game.weights[side], game.issues):
        j = issue.index_of(alloc[issue.name], side)
        terms.append(w * issue.payoffs[side][j] / issue.max_payoff(side))
    # weights that sum to 1 only within rounding can push the total past 1
    return Utility(min(math.fsum(terms), 1.0), False)


def validate_allocation(game: Game, alloc: Allocation) -> None:
    for name, label in alloc.items():
        try:
            issue = game.issue(name)
        except KeyError:
            raise ConfigError(f"unknown issue {name!r} in allocation") from None
        if not issue.has_label(label):
            raise UnknownLabel(f"{label!r} is not a value of issue {name!r}")


# -- config documents -------------------------------------------------------

def _load_doc(text: str | Mapping[str, Any]) -> Mapping[str, Any]:
    if isinstance(text, Mapping):
        return text
    doc = yaml.safe_load(text)
    if not isinstance(doc, Mapping):
        raise ConfigError("document is not a mapping")
    return doc


def _pair(value: Any, key: str, name: str, identical: bool) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{name}: {key} must be a list")
    if len(value) == 1 and identical:
        return (value[0], value[0])
    if len(value) != 2:
        raise ConfigError(f"{name}: {key} needs two entries (one per side), got {len(value)}")
    return tuple(value)


def parse_issue_config(text: str | Mapping[str, Any]) -> Issue:
    """Build an :class:`Issue` from a YAML document (or already-loaded mapping).

    A single entry under ``descriptions``, ``payoffs`` or ``payoff_labels`` is
    only broadcast to both sides when the document sets ``identical_sides: true``.
    """
    doc = _load_doc(text)
    for key in ("name", "issue_type", "descriptions", "payoffs", "payoff_labels"):
        if key not in doc:
            raise ConfigError(f"issue document missing key {key!r}")
    name = str(doc["name"])
    identical = bool(doc.get("identical_sides", False))
    descriptions = tuple(str(d) for d in _pair(doc["descriptions"], "descriptions", name, identical))
    payoffs = tuple(
        tuple(float(v) for v in side)
        for side in _pair(doc["payoffs"], "payoffs", name, identical)
    )
    labels = tuple(
        tuple(str(v) for v in side)
        for side in _pair(doc["payoff_labels"], "payoff_labels", name, identical)
    )
    return Issue(name, str(doc["issue_type"]), descriptions, payoffs, labels)


def parse_game_config(
    text: str | Mapping[str, Any],
    issues: Iterable[Issue],
    weights: Sequence[Sequence[float]] | None = None,
) -> Game:
    """Build a :class:`Game` from a game document and a pool of issues.

    If the document lists ``issues`` by name, they are resolved against
    ``issues``; otherwise every supplied issue is used in order. ``weights``
    (argument, else document key) default to uniform per side.
    """
    doc = _load_doc(text)
    for key in ("name", "description", "sides", "parties"):
        if key not in doc:
            raise ConfigError(f"game document missing key {key!r}")
    name = str(doc["name"])
    pool = {i.name: i for i in issues}
    wanted = doc.get("issues")
    if wanted is None:
        chosen = tuple(pool.values())
    else:
        chosen = []
        for entry in wanted:
            if isinstance(entry, Mapping):
                chosen.append(parse_issue_config(entry))
            elif entry in pool:
                chosen.append(pool[entry])
            else:
                raise ConfigError(f"{name}: issue {entry!r} not available")
        chosen = tuple(chosen)
    if weights is None:
        weights = doc.get("weights")
    if weights is None:
        n = len(chosen)
        weights = [[1.0 / n] * n, [1.0 / n] * n]
    if len(weights) != 2:
        raise ConfigError(f"{name}: weights need one list per side")
    sides = tuple(str(s) for s in doc["sides"])
    parties = tuple(str(p) for p in doc["parties"])
    if len(sides) != 2 or len(parties) != 2:
        raise ConfigError(f"{name}: a game has exactly two sides and parties")
    return Game(
        name=name,
        description=str(doc["description"]),
        sides=sides,
        parties=parties,
        issues=chosen,
        weights=tuple(tuple(float(x) for x in w) for w in weights),
    )


def _num(x: float):
    return int(x) if float(x).is_integer() else x


def issue_to_dict(issue: Issue) -> dict:
    return {
        "name": issue.name,
        "issue_type": issue.issue_type,
        "descriptions": list(issue.descriptions),
        "payoffs": [[_num(v) for v in side] for side in issue.payoffs],
        "payoff_labels": [list(side) for side in issue.payoff_labels],
    }


def game_to_dict(game: Game, inline_issues: bool = False) -> dict:
    return {
        "name": game.name,
        "description": game.description,
        "sides": list(game.sides),
        "parties": list(game.parties),
        "issues": [issue_to_dict(i) if inline_issues else i.name for i in game.issues],
        "weights": [list(w) for w in game.weights],
    }


def serialize_issue(issue: Issue) -> str:
    return yaml.safe_dump(issue_to_dict(issue), sort_keys=False, allow_unicode=True, width=1000)


def serialize_game(game: Game, inline_issues: bool = False) -> str:
    return yaml.safe_dump(
        game_to_dict(game, inline_issues), sort_keys=False, allow_unicode=True, width=1000
    )


# -- bundled documents --------------------------------------------------------

def _data(*parts: str):
    return resources.files("structneg").joinpath("data", *parts)


def builtin_issue_text(name: str) -> str:
    return _data("issues", f"{name}.yaml").read_text(encoding="utf-8")


def builtin_game_text(name: str = "generic-rental-agreement") -> str:
    return _data("games", f"{name}.yaml").read_text(encoding="utf-8")


def builtin_issue(name: str) -> Issue:
    return parse_issue_config(builtin_issue_text(name))


BUILTIN_ISSUES = ("rent", "duration", "deposit", "subletting")


def rental_game(
    issues: Sequence[str] = ("rent",),
    weights: Sequence[Sequence[float]] | None = None,
) -> Game:
    """The bundled landlord/tenant game restricted to ``issues``."""
    pool = [builtin_issue(n) for n in issues]
    return parse_game_config(builtin_game_text(), pool, weights)


def load_game(path: str | Path, issue_dirs: Sequence[str | Path] = ()) -> Game:
    """Load a game file, resolving named issues from sibling ``<name>.yaml``,
    ``issues/<name>.yaml``, any of ``issue_dirs``, then the bundled issues."""
    path = Path(path)
    doc = _load_doc(path.read_text(encoding="utf-8"))
    names = [e for e in doc.get("issues") or () if not isinstance(e, Mapping)]
    if doc.get("issues") is None:
        raise ConfigError(f"{path}: game file lists no issues")
    search = [path.parent, path.parent / "issues", *map(Path, issue_dirs)]
    pool = []
    for name in names:
        for d in search:
            candidate = d / f"{name}.yaml"
            if candidate.is_file():
                pool.append(parse_issue_config(candidate.read_text(encoding="utf-8")))
                break
        else:
            if name in BUILTIN_ISSUES:
                pool.append(builtin_issue(name))
            else:
                raise ConfigError(f"{path}: cannot find issue {name!r}")
    return parse_game_config(doc, pool)


def resolve_game(spec: str) -> Game:
    """``spec`` is a path to a game file or ``rental:<issue>[+<issue>...]``."""
    if spec.startswith("rental"):
        _, _, rest = spec.partition(":")
        names = tuple(rest.split("+")) if rest else ("rent",)
        return rental_game(names)
    return load_game(spec)
