import json
import random

import pytest

from structneg.agents import ScriptedAgent, ScriptedStrategy
from structneg.game import rental_game
from structneg.harness import (
    ModelSpec,
    SchedulingError,
    aggregate,
    debias_permutations,
    load_results,
    run_qualifier,
    run_tournament,
    schedule,
    summaries_to_csv,
)
from structneg.protocol import NegotiationConfig


def scripted(name, family="time_conceder", **kw):
    strategy = ScriptedStrategy(family, **kw)
    return ModelSpec(name, lambda seed: ScriptedAgent(strategy))


class Crash:
    def generate(self, kind, view):
        raise RuntimeError("provider down")


def test_debias_permutations():
    perms = debias_permutations("gpt", "claude")
    assert len({(p.side0, p.starter) for p in perms}) == 4
    assert len(debias_permutations("gpt", "gpt")) == 4


def test_schedule_arithmetic():
    runs = schedule(24)
    assert len(runs) == 24
    assert sorted({s for s, _ in runs}) == list(range(6))
    assert all(sum(p.index == i for _, p in runs) == 6 for i in range(4))
    with pytest.raises(SchedulingError):
        schedule(10)
    with pytest.raises(SchedulingError):
        schedule(8, seeds=[1])


def test_qualifier_pass_and_fail(rent_game):
    ok = run_qualifier(scripted("conceder"), rent_game)
    assert ok.passed and ok.hard_agreements == 10 and ok.runs == 10
    bad = run_qualifier(scripted("stubborn", "never_concede"), rent_game)
    assert not bad.passed and bad.hard_agreements == 0


def test_qualifier_passes_on_some_agreements(rent_game):
    # conceders in the first 3 runs, stubborn afterwards
    def factory(seed):
        return ScriptedAgent(ScriptedStrategy("time_conceder" if seed // 2 < 3 else "never_concede"))

    res = run_qualifier(ModelSpec("mixed", factory), rent_game)
    assert res.passed and res.hard_agreements == 3


def test_qualifier_needs_single_distributive_issue():
    with pytest.raises(ValueError):
        run_qualifier(scripted("x"), rental_game(("duration",)))


def test_tournament_cells(rent_game, tmp_path):
    models = [scripted("m1"), scripted("m2", u_min=0.3)]
    results = run_tournament(models, [rent_game], 1, qualified=["m1", "m2"], results_path=tmp_path / "r.jsonl")
    assert len(results) == 12
    cells = {}
    for r in results:
        cells.setdefault(tuple(r["cell"]), []).append(r["permutation"])
    assert set(cells) == {("m1", "m1"), ("m1", "m2"), ("m2", "m2")}
    assert all(sorted(v) == [0, 1, 2, 3] for v in cells.values())
    assert len(load_results(tmp_path / "r.jsonl")) == 12


def test_tournament_requires_qualifier(rent_game):
    with pytest.raises(SchedulingError, match="qualifier"):
        run_tournament([scripted("m1"), scripted("m2")], [rent_game], 1, qualified=["m1"])
    assert len(run_tournament([scripted("m1")], [rent_game], 1, require_qualified=False)) == 4


def test_tournament_resumes(rent_game, tmp_path):
    path = tmp_path / "r.jsonl"
    first = run_tournament([scripted("m1")], [rent_game], 1, require_qualified=False, results_path=path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:2]) + "\n")
    again = run_tournament([scripted("m1")], [rent_game], 1, require_qualified=False, results_path=path)
    assert len(path.read_text().splitlines()) == 4
    assert again == first


def test_parallel_workers_write_in_schedule_order(rent_game, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run_tournament([scripted("m1"), scripted("m2")], [rent_game], 2, require_qualified=False, results_path=a)
    run_tournament([scripted("m1"), scripted("m2")], [rent_game], 2, require_qualified=False, results_path=b,
                   workers=4)
    assert a.read_bytes() == b.read_bytes()


def test_grouping_by_game_class():
    games = [rental_game(("rent",)), rental_game(("duration",)),
             rental_game(("rent", "deposit"), [[0.7, 0.3], [0.3, 0.7]])]
    models = [scripted("g", "greedy_compatible_mix")]
    records = run_tournament(models, games, 1, require_qualified=False)
    summ = aggregate(records, ["game_class"])
    assert set(summ) == {("competitive",), ("cooperative",)}
    assert summ[("competitive",)].runs == 4 and summ[("cooperative",)].runs == 8


def _record(run_id, us, status="hard_agreement", perm=0):
    agents = [{"model": "m", "opponent": "m", "side": i, "party": "p", "starter": i == 0, "agent": i, "U": u,
               "U_hat": u if status != "no_agreement" else None, "internal_faithfulness": 1.0,
               "external_faithfulness": None, "note_instruct": 1.0, "msg_instruct": 1.0, "format_instruct": 1.0}
              for i, u in enumerate(us)]
    agreed = status == "hard_agreement"
    return {"run_id": run_id, "cell": ["m", "m"], "cell_type": "self", "game": "g", "game_class": "competitive",
            "n_issues": 1, "permutation": perm, "status": status, "soft_agreement": agreed,
            "hard_agreement": agreed, "rounds_used": 3, "agents": agents}


def test_aggregate_mean_and_stderr():
    recs = [_record("r1", (0.4, 0.6)), _record("r2", (0.5, 0.5))]
    summ = aggregate(recs, ["model"])[("m",)]
    assert summ.metrics["U"].mean == 0.5
    assert summ.metrics["U"].n == 4
    assert summ.metrics["U"].stderr == pytest.approx(0.0408248290463863, abs=1e-12)
    assert summ.metrics["external_faithfulness"].mean is None


def test_aggregate_no_agreement_group():
    recs = [_record("r1", (0.0, 0.0), "no_agreement")]
    summ = aggregate(recs, ["model"])[("m",)]
    assert summ.hard_rate == 0 and summ.metrics["U"].mean == 0.0
    assert summ.metrics["U_hat"].mean is None and summ.metrics["U_hat"].n == 0


def test_aggregate_aborted_handling():
    recs = [_record("r1", (0.7, 0.3)), _record("r2", (0.0, 0.0), "aborted")]
    assert aggregate(recs)[("m",)].runs == 1
    summ = aggregate(recs, include_aborted=True)[("m",)]
    assert summ.runs == 2 and summ.aborted == 1 and summ.hard_rate == 0.5
    with pytest.raises(ValueError, match="no completed runs"):
        aggregate([_record("r2", (0.0, 0.0), "aborted")])
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate(recs, ["colour"])


def test_aggregate_order_and_relabel_invariant(rent_game):
    recs = run_tournament([scripted("m1"), scripted("m2", u_min=0.2)], [rent_game], 2, require_qualified=False)
    keys = ["model", "side"]
    base = summaries_to_csv(aggregate(recs, keys), keys)
    rng = random.Random(7)
    for _ in range(5):
        shuffled = recs[:]
        rng.shuffle(shuffled)
        for r in shuffled:
            r["agents"] = r["agents"][::-1]
        assert summaries_to_csv(aggregate(shuffled, keys), keys) == base


def test_aborted_runs_are_recorded(rent_game):
    crash = ModelSpec("crash", lambda seed: Crash())
    recs = run_tournament([crash], [rent_game], 1, require_qualified=False,
                          config=NegotiationConfig(max_attempts=2))
    assert {r["status"] for r in recs} == {"aborted"}
    assert "provider down" in recs[0]["error"]
    assert json.loads(json.dumps(recs[0]))["agents"][0]["U"] == 0.0
