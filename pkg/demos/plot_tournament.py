"""
A small tournament
==================

Three scripted negotiators play self-play and cross-play on three games. Each
pairing runs all four side/starter arrangements so neither seat is favoured.
"""

import tempfile
from pathlib import Path

from structneg import rental_game
from structneg.agents import ScriptedAgent, ScriptedStrategy
from structneg.harness import ModelSpec, aggregate, run_qualifier, run_tournament, summaries_to_csv


def scripted(name, **kw):
    strategy = ScriptedStrategy(**kw)
    return ModelSpec(name, lambda seed: ScriptedAgent(strategy))


models = [
    scripted("boulware", e=0.3),
    scripted("linear"),
    scripted("greedy", family="greedy_compatible_mix"),
]
games = [
    rental_game(("rent",)),
    rental_game(("duration",)),
    rental_game(("rent", "deposit"), [[0.7, 0.3], [0.3, 0.7]]),
]

# Only models that close at least one deal in self-play may enter.
qualified = [m.name for m in models if run_qualifier(m, games[0]).passed]
print("qualified:", qualified)

out = Path(tempfile.mkdtemp()) / "results.jsonl"
records = run_tournament(models, games, 2, qualified=qualified, results_path=out)
print(len(records), "runs written to", out)

keys = ["model", "game_class"]
print(summaries_to_csv(aggregate(records, keys), keys))
