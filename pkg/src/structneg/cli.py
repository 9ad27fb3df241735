"""``negotiate`` command line.

Agent specs look like ``scripted:time_conceder:u_min=0.5,e=1`` or
``lm:gpt-4o:temperature=0,role_scheme=three_role_dialogue``. Games are a game
file path or ``rental:rent+duration``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .agents import LmAgent, LmBackend, ScriptedAgent, ScriptedStrategy
from .game import parse_game_config, rental_game, resolve_game
from .harness import (
    ModelSpec,
    aggregate,
    load_results,
    run_qualifier,
    run_tournament,
    summaries_to_csv,
)
from .metrics import compute_metrics
from .protocol import AgentSpec, MemoryConfig, NegotiationConfig, run_negotiation
from .scoring import brute_force_frontier, classify_game, frontier_csv, optimal_score


def _coerce(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return {"true": True, "false": False}.get(v.lower(), v)


def parse_agent_spec(spec: str, name: str | None = None) -> ModelSpec:
    kind, _, rest = spec.partition(":")
    target, _, opts = rest.partition(":")
    kwargs = {}
    if opts:
        for item in opts.split(","):
            k, _, v = item.partition("=")
            kwargs[k.strip()] = _coerce(v.strip())
    persona = kwargs.pop("persona", None)
    visibility = int(kwargs.pop("visibility", 1))
    if kind == "scripted":
        strategy = ScriptedStrategy(family=target or "time_conceder", **kwargs)
        factory = lambda seed, s=strategy: ScriptedAgent(s)
    elif kind == "lm":
        if not target:
            raise argparse.ArgumentTypeError("lm specs need a model id: lm:MODEL")
        if "provider_roles" in kwargs:
            kwargs["provider_roles"] = tuple(str(kwargs["provider_roles"]).split("/"))
        factory = lambda seed, t=target, kw=kwargs: LmAgent(LmBackend(t, **kw))
    else:
        raise argparse.ArgumentTypeError(f"unknown agent kind {kind!r}")
    return ModelSpec(name or spec, factory, persona, visibility)


def _config(args) -> NegotiationConfig:
    mem = MemoryConfig(max_note_words=args.max_words, max_msg_words=args.max_words)
    return NegotiationConfig(max_rounds=args.max_rounds, memory=mem, tom_probe=not args.no_tom)


def cmd_run(args) -> int:
    game = resolve_game(args.game)
    a = parse_agent_spec(args.agent_a, "a")
    b = parse_agent_spec(args.agent_b, "b")
    agents = [
        AgentSpec("a", 0, a.factory(args.seed * 2), a.persona, a.visibility_level),
        AgentSpec("b", 1, b.factory(args.seed * 2 + 1), b.persona, b.visibility_level),
    ]
    if args.swap_sides:
        agents[0].side, agents[1].side = 1, 0
    state, _ = run_negotiation(game, agents, _config(args), args.seed,
                               starter=1 if args.b_starts else 0, transcript=args.transcript)
    if args.verbose:
        for ev in state.events:
            print(f"<round: {ev.round}, agent: {ev.agent}> [{ev.kind}]\n{ev.text}\n")
    print(json.dumps(compute_metrics(state).to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_qualify(args) -> int:
    model = parse_agent_spec(args.model)
    game = resolve_game(args.game)
    res = run_qualifier(model, game, args.n, _config(args))
    print(f"{res.model}: {'PASS' if res.passed else 'FAIL'} "
          f"({res.hard_agreements}/{res.runs} hard agreements, {res.aborted} aborted)")
    return 0 if res.passed else 1


def _games_from_config(entries) -> list:
    games = []
    for entry in entries:
        if isinstance(entry, str):
            games.append(resolve_game(entry))
        elif "issues" in entry and "path" not in entry:
            games.append(rental_game(tuple(entry["issues"]), entry.get("weights")))
        else:
            base = resolve_game(entry["path"])
            if "weights" in entry:
                from .game import game_to_dict
                base = parse_game_config(game_to_dict(base), base.issues, entry["weights"])
            games.append(base)
    return games


def cmd_tournament(args) -> int:
    cfg = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
    models = [parse_agent_spec(spec, name) for name, spec in cfg["models"].items()]
    games = _games_from_config(cfg["games"])
    mem = MemoryConfig(**cfg.get("memory", {}))
    config = NegotiationConfig(max_rounds=cfg.get("max_rounds", 10), memory=mem,
                               tom_probe=cfg.get("tom_probe", True))
    qualified = None
    if not cfg.get("skip_qualifier", False):
        qgame = resolve_game(cfg.get("qualifier_game", "rental:rent"))
        qualified = []
        for m in models:
            res = run_qualifier(m, qgame, cfg.get("qualifier_runs", 10), config)
            print(f"qualifier {m.name}: {'PASS' if res.passed else 'FAIL'} ({res.hard_agreements}/{res.runs})")
            if res.passed:
                qualified.append(m.name)
        models = [m for m in models if m.name in qualified]
    results = run_tournament(
        models, games, cfg.get("runs_per_cell", 1),
        seeds=cfg.get("seeds"), config=config, qualified=qualified,
        require_qualified=not cfg.get("skip_qualifier", False),
        results_path=args.results or cfg.get("results", "results.jsonl"),
        transcript_dir=cfg.get("transcripts"), workers=cfg.get("workers", 1),
    )
    print(f"{len(results)} runs recorded")
    return 0


def cmd_report(args) -> int:
    records = load_results(args.results)
    keys = [k.strip() for k in args.group_by.split(",") if k.strip()]
    summaries = aggregate(records, keys, include_aborted=args.count_aborted)
    text = summaries_to_csv(summaries, keys)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_score(args) -> int:
    game = resolve_game(args.game)
    opt = optimal_score(game)
    print(f"game: {game.name} issues: {', '.join(game.issue_names)}")
    print(f"classification: {classify_game(game)}")
    if opt is None:
        print("per_side_optimum: undefined (compatible issues present; see frontier)")
    else:
        print(f"per_side_optimum: {opt.per_side_optimum:.6f}")
    if args.frontier:
        text = frontier_csv(game, brute_force_frontier(game))
        if args.frontier == "-":
            sys.stdout.write(text)
        else:
            Path(args.frontier).write_text(text, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="negotiate", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def protocol_opts(sp):
        sp.add_argument("--max-rounds", type=int, default=10)
        sp.add_argument("--max-words", type=int, default=64)
        sp.add_argument("--no-tom", action="store_true", help="disable the theory-of-mind probe")

    r = sub.add_parser("run", help="play one negotiation")
    r.add_argument("--game", default="rental:rent")
    r.add_argument("--agent-a", required=True)
    r.add_argument("--agent-b", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--swap-sides", action="store_true", help="agent a plays side 1")
    r.add_argument("--b-starts", action="store_true")
    r.add_argument("--transcript", help="append transcript records to this JSONL file")
    protocol_opts(r)
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("qualify", help="self-play qualifier")
    q.add_argument("--model", required=True)
    q.add_argument("--game", default="rental:rent")
    q.add_argument("-n", type=int, default=10)
    protocol_opts(q)
    q.set_defaults(func=cmd_qualify)

    t = sub.add_parser("tournament", help="self-play and cross-play from a YAML config")
    t.add_argument("--config", required=True)
    t.add_argument("--results")
    t.set_defaults(func=cmd_tournament)

    rep = sub.add_parser("report", help="aggregate a results file")
    rep.add_argument("--results", default="results.jsonl")
    rep.add_argument("--group-by", default="model,game_class")
    rep.add_argument("--count-aborted", action="store_true", help="count aborted runs as non-agreements")
    rep.add_argument("--csv")
    rep.set_defaults(func=cmd_report)

    s = sub.add_parser("score", help="optimal score and classification of a game")
    s.add_argument("--game", required=True)
    s.add_argument("--frontier", help="write the full frontier as CSV ('-' for stdout)")
    s.set_defaults(func=cmd_score)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
