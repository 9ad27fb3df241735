"""Debiased self-play / cross-play scheduling, qualifiers and aggregation."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .extraction import FallbackExtractor
from .game import Game
from .metrics import compute_metrics
from .protocol import AgentSpec, Backend, NegotiationConfig, run_negotiation, write_jsonl
from .scoring import classify_game

RESULTS_SCHEMA = 1
METRIC_FIELDS = (
    "U", "U_hat", "internal_faithfulness", "external_faithfulness",
    "note_instruct", "msg_instruct", "format_instruct", "rounds_used",
)


class SchedulingError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """A negotiator to schedule. ``factory(seed)`` builds a fresh, independent backend."""

    name: str
    factory: Callable[[int], Backend]
    persona: str | None = None
    visibility_level: int = 1


@dataclass(frozen=True)
class Permutation:
    """Which slot ("a" or "b") plays side 0 and which moves first."""

    side0: str
    starter: str
    index: int

    def side_of(self, slot: str) -> int:
        return 0 if slot == self.side0 else 1


def debias_permutations(model_a: str, model_b: str) -> list[Permutation]:
    """Both side assignments crossed with both starting positions.

    Slots stay distinct in self-play, so a model facing itself still gets all
    four arrangements.
    """
    perms = []
    for side0 in ("a", "b"):
        for starter in ("a", "b"):
            perms.append(Permutation(side0, starter, len(perms)))
    return perms


def schedule(n_runs: int, seeds: Sequence[int] | None = None) -> list[tuple[int, Permutation]]:
    """``n_runs`` (a multiple of 4) as seeds x permutations."""
    if n_runs % 4:
        raise SchedulingError(f"{n_runs} runs cannot be split evenly over 4 permutations")
    n_seeds = n_runs // 4
    seeds = list(range(n_seeds)) if seeds is None else list(seeds)[:n_seeds]
    if len(seeds) < n_seeds:
        raise SchedulingError(f"need {n_seeds} seeds, got {len(seeds)}")
    perms = debias_permutations("a", "b")
    return [(seed, p) for seed in seeds for p in perms]


def game_key(game: Game) -> str:
    return f"{game.name}[{'+'.join(game.issue_names)}]"


def run_id_for(model_a: str, model_b: str, game: Game, perm: Permutation, seed: int) -> str:
    return f"{model_a}~{model_b}|{game_key(game)}|p{perm.index}|s{seed}"


def play(
    game: Game,
    model_a: ModelSpec,
    model_b: ModelSpec,
    perm: Permutation,
    seed: int,
    config: NegotiationConfig | None = None,
    fallback: FallbackExtractor | None = None,
    transcript: str | Path | None = None,
    payoff_basis: str = "soft",
) -> dict:
    """Run one scheduled negotiation and return its results record."""
    slots = {"a": model_a, "b": model_b}
    order = [perm.starter, "b" if perm.starter == "a" else "a"]
    agents = []
    for n, slot in enumerate(order):
        m = slots[slot]
        agents.append(AgentSpec(f"{m.name}/{slot}", perm.side_of(slot), m.factory(seed * 2 + n),
                                m.persona, m.visibility_level))
    run_id = run_id_for(model_a.name, model_b.name, game, perm, seed)
    state, _ = run_negotiation(game, agents, config, seed, fallback=fallback, run_id=run_id,
                               transcript=transcript)
    rm = compute_metrics(state, payoff_basis)
    per_agent = []
    for n, slot in enumerate(order):
        per_agent.append({
            "model": slots[slot].name,
            "opponent": slots[order[1 - n]].name,
            "slot": slot,
            "agent": n,
            "side": perm.side_of(slot),
            "party": game.parties[perm.side_of(slot)],
            "starter": n == 0,
            "U": rm.U[n],
            "U_hat": None if rm.U_hat is None else rm.U_hat[n],
            "internal_faithfulness": rm.internal_faithfulness[n],
            "external_faithfulness": rm.external_faithfulness[n],
            "note_instruct": rm.note_instruct[n],
            "msg_instruct": rm.msg_instruct[n],
            "format_instruct": rm.format_instruct[n],
        })
    return {
        "schema": RESULTS_SCHEMA,
        "run_id": run_id,
        "cell": [model_a.name, model_b.name],
        "cell_type": "self" if model_a.name == model_b.name else "cross",
        "game": game_key(game),
        "game_class": classify_game(game),
        "n_issues": len(game.issues),
        "seed": seed,
        "permutation": perm.index,
        "status": rm.status,
        "error": state.error,
        "soft_agreement": rm.soft_agreement,
        "hard_agreement": rm.hard_agreement,
        "agreed": rm.agreed,
        "rounds_used": rm.rounds_used,
        "agents": per_agent,
    }


@dataclass(frozen=True)
class QualifierResult:
    model: str
    passed: bool
    hard_agreements: int
    runs: int
    aborted: int
    records: tuple[dict, ...] = field(repr=False)


def run_qualifier(
    model: ModelSpec,
    game: Game,
    n: int = 10,
    config: NegotiationConfig | None = None,
    fallback: FallbackExtractor | None = None,
) -> QualifierResult:
    """Self-play ``n`` runs of a single distributive issue; pass on any hard agreement.

    Runs cycle through the four debiasing permutations.
    """
    if len(game.issues) != 1 or game.issues[0].issue_type != "distributive":
        raise ValueError("qualifier game must have exactly one distributive issue")
    perms = debias_permutations(model.name, model.name)
    records = [play(game, model, model, perms[i % 4], i, config, fallback) for i in range(n)]
    hard = sum(r["hard_agreement"] for r in records)
    aborted = sum(r["status"] == "aborted" for r in records)
    return QualifierResult(model.name, hard >= 1, hard, n, aborted, tuple(records))


def _read_done(path: Path) -> dict[str, dict]:
    done = {}
    if path.is_file():
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                rec = json.loads(line)
                done[rec["run_id"]] = rec
    return done


def run_tournament(
    models: Sequence[ModelSpec],
    games: Sequence[Game],
    runs_per_cell: int = 1,
    *,
    seeds: Sequence[int] | None = None,
    config: NegotiationConfig | None = None,
    qualified: Iterable[str] | None = None,
    require_qualified: bool = True,
    results_path: str | Path | None = None,
    transcript_dir: str | Path | None = None,
    fallback: FallbackExtractor | None = None,
    workers: int = 1,
    payoff_basis: str = "soft",
) -> list[dict]:
    """Every self-play cell (m, m) and cross-play cell (m, m') for m before m'.

    Each cell plays ``runs_per_cell`` seeds x 4 permutations on every game.
    Records are appended to ``results_path`` in schedule order; runs already
    present there are skipped, which makes interrupted tournaments resumable.
    """
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise SchedulingError("model names must be unique")
    if require_qualified:
        ok = set(qualified or ())
        missing = [n for n in names if n not in ok]
        if missing:
            raise SchedulingError(f"models have not passed the qualifier: {missing}")
    seeds = list(range(runs_per_cell)) if seeds is None else list(seeds)
    if len(seeds) != runs_per_cell:
        raise SchedulingError(f"runs_per_cell={runs_per_cell} but {len(seeds)} seeds given")
    jobs = []
    for i, ma in enumerate(models):
        for mb in models[i:]:
            for game in games:
                for seed in seeds:
                    for perm in debias_permutations(ma.name, mb.name):
                        jobs.append((game, ma, mb, perm, seed))

    path = Path(results_path) if results_path is not None else None
    done = _read_done(path) if path else {}
    tdir = Path(transcript_dir) if transcript_dir else None
    if tdir:
        tdir.mkdir(parents=True, exist_ok=True)

    def work(job):
        game, ma, mb, perm, seed = job
        rid = run_id_for(ma.name, mb.name, game, perm, seed)
        if rid in done:
            return done[rid], False
        tpath = None
        if tdir:
            tpath = tdir / (rid.replace("|", "__").replace("/", "_").replace("~", "-vs-") + ".jsonl")
            if tpath.exists():
                tpath.unlink()
        return play(game, ma, mb, perm, seed, config, fallback, tpath, payoff_basis), True

    results: list[dict] = []
    if workers <= 1:
        for job in jobs:
            rec, fresh = work(job)
            if fresh and path:
                write_jsonl([rec], path)
            results.append(rec)
        return results
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order, so the file order is deterministic
        for rec, fresh in pool.map(work, jobs):
            if fresh and path:
                write_jsonl([rec], path)
            results.append(rec)
    return results


def load_results(path: str | Path) -> list[dict]:
    return list(_read_done(Path(path)).values())


# -- aggregation ---------------------------------------------------------------

GROUP_KEYS = ("model", "opponent", "game", "game_class", "cell_type", "side", "party",
              "starter", "n_issues", "permutation")


@dataclass(frozen=True)
class Stat:
    mean: float | None
    stderr: float | None
    n: int


def _stat(values: Sequence[float]) -> Stat:
    vals = sorted(v for v in values if v is not None)
    if not vals:
        return Stat(None, None, 0)
    mean = math.fsum(vals) / len(vals)
    se = statistics.stdev(vals) / math.sqrt(len(vals)) if len(vals) > 1 else None
    return Stat(mean, se, len(vals))


@dataclass(frozen=True)
class BatchSummary:
    group: tuple
    runs: int
    aborted: int
    soft_rate: float
    hard_rate: float
    metrics: dict[str, Stat]
    per_permutation: dict[int, int]


def _rows(records: Iterable[dict], include_aborted: bool):
    for rec in records:
        aborted = rec["status"] == "aborted"
        if aborted and not include_aborted:
            yield rec, None
            continue
        for a in rec["agents"]:
            row = {k: rec.get(k) for k in ("game", "game_class", "cell_type", "n_issues", "permutation")}
            row.update(a)
            row["rounds_used"] = rec["rounds_used"]
            row["soft"] = bool(rec["soft_agreement"]) and not aborted
            row["hard"] = bool(rec["hard_agreement"]) and not aborted
            row["run_id"] = rec["run_id"]
            if aborted:
                row["U"], row["U_hat"] = 0.0, None
            yield rec, row


def aggregate(
    records: Iterable[dict],
    group_by: Sequence[str] = ("model",),
    include_aborted: bool = False,
) -> dict[tuple, BatchSummary]:
    """Mean and standard error of every metric per group of agent-level rows.

    Aborted runs are left out unless ``include_aborted``, which counts them as
    non-agreements.
    """
    for k in group_by:
        if k not in GROUP_KEYS:
            raise ValueError(f"cannot group by {k!r}; choose from {GROUP_KEYS}")
    records = list(records)
    if not records:
        raise ValueError("no runs to aggregate")
    groups: dict[tuple, list[dict]] = {}
    aborted_counts: dict[tuple, set] = {}
    for rec, row in _rows(records, include_aborted):
        if row is None:
            for a in rec["agents"]:
                probe = {**{k: rec.get(k) for k in ("game", "game_class", "cell_type", "n_issues", "permutation")}, **a}
                aborted_counts.setdefault(tuple(probe.get(k) for k in group_by), set()).add(rec["run_id"])
            continue
        key = tuple(row.get(k) for k in group_by)
        groups.setdefault(key, []).append(row)
        if rec["status"] == "aborted":
            aborted_counts.setdefault(key, set()).add(rec["run_id"])
    empty = [k for k in aborted_counts if k not in groups]
    if empty:
        raise ValueError(f"groups with no completed runs: {empty}")
    out = {}
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        rows = groups[key]
        runs = {r["run_id"] for r in rows}
        metrics = {f: _stat([r[f] for r in rows]) for f in METRIC_FIELDS}
        per_perm: dict[int, int] = {}
        for r in rows:
            per_perm[r["permutation"]] = per_perm.get(r["permutation"], 0) + 1
        out[key] = BatchSummary(
            group=key,
            runs=len(runs),
            aborted=len(aborted_counts.get(key, ())),
            soft_rate=sum(r["soft"] for r in rows) / len(rows),
            hard_rate=sum(r["hard"] for r in rows) / len(rows),
            metrics=metrics,
            per_permutation=dict(sorted(per_perm.items())),
        )
    return out


CSV_COLUMNS = (
    ("soft ✓", "soft_rate"), ("hard ✓✓", "hard_rate"), ("U", "U"), ("U_hat", "U_hat"),
    ("faithful int", "internal_faithfulness"), ("faithful ext", "external_faithfulness"),
    ("note instruct", "note_instruct"), ("msg instruct", "msg_instruct"),
    ("format instruct", "format_instruct"), ("rounds", "rounds_used"),
)


def summaries_to_csv(summaries: Mapping[tuple, BatchSummary], group_by: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(group_by) + ["runs"]
    for title, f in CSV_COLUMNS:
        header.append(title)
        if f in METRIC_FIELDS:
            header.append(f"{title} se")
    w.writerow(header)

    def fmt(x):
        return "" if x is None else f"{x:.4f}"

    for key, s in summaries.items():
        row = [*key, s.runs]
        for _, f in CSV_COLUMNS:
            if f in METRIC_FIELDS:
                row += [fmt(s.metrics[f].mean), fmt(s.metrics[f].stderr)]
            else:
                row.append(fmt(getattr(s, f)))
        w.writerow(row)
    return buf.getvalue()
