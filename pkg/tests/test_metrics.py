import pytest

from conftest import make_state
from structneg.metrics import (
    compute_metrics,
    detect_soft_agreement,
    external_faithfulness,
    instruction_metrics,
    internal_faithfulness,
    word_count,
)
from structneg.protocol import MemoryConfig

R = lambda v: {"rent": v}


def _landlord_turns(offers, stated="$1200", tom=None):
    # agent 0 is the landlord (side 0, payoff rises with rent); agent 1 stays silent
    return [(i + 1, 0, R(stated), R(tom) if tom else None, R(o)) for i, o in enumerate(offers)]


def test_internal_one_violation_in_four(rent_game):
    st = make_state(rent_game, _landlord_turns(["$1300", "$1200", "$1100", "$1400"]), tom_probe=False)
    assert internal_faithfulness(st, 0) == 0.75


def test_internal_no_violation(rent_game):
    st = make_state(rent_game, _landlord_turns(["$1300", "$1200", "$1200", "$1500"]), tom_probe=False)
    assert internal_faithfulness(st, 0) == 1.0


def test_internal_for_tenant_side(rent_game):
    # the tenant (side 1) undercuts itself by offering more rent than its note
    turns = [(1, 1, R("$800"), None, R("$900")), (2, 1, R("$800"), None, R("$700"))]
    st = make_state(rent_game, turns, tom_probe=False)
    assert internal_faithfulness(st, 1) == 0.5


def test_missing_offers_are_not_opportunities(rent_game):
    turns = [(1, 0, R("$1200"), None, {}), (2, 0, {}, None, R("$500")), (3, 0, R("$1200"), None, R("$1100"))]
    st = make_state(rent_game, turns, tom_probe=False)
    assert internal_faithfulness(st, 0) == 0.0
    assert internal_faithfulness(st, 1) == 1.0


def test_external_violation_and_boundary(rent_game):
    # the landlord believes the tenant would settle for $1000; $900 gives more away
    st = make_state(rent_game, _landlord_turns(["$1100", "$1000", "$900", "$1200"], tom="$1000"))
    assert external_faithfulness(st, 0) == 0.75
    # offering exactly the estimate is not a violation
    st = make_state(rent_game, _landlord_turns(["$1000"] * 4, tom="$1000"))
    assert external_faithfulness(st, 0) == 1.0


def test_external_off_without_probe(rent_game):
    st = make_state(rent_game, _landlord_turns(["$1000"]), tom_probe=False)
    assert external_faithfulness(st, 0) is None
    assert compute_metrics(st).external_faithfulness == (None, None)


def test_word_limits(rent_game):
    long_msg = " ".join(["word"] * 70)
    turns = [(1, 0, R("$1200"), None, R("$1200"), "short note", long_msg),
             (2, 0, R("$1200"), None, R("$1200"), " ".join(["w"] * 64), "fine")]
    st = make_state(rent_game, turns, tom_probe=False)
    assert word_count(long_msg) == 70
    note_i, msg_i, _ = instruction_metrics(st, 0)
    assert (note_i, msg_i) == (1.0, 0.5)
    assert instruction_metrics(st, 0, MemoryConfig(max_msg_words=70))[1] == 1.0
    assert instruction_metrics(st, 1) == (None, None, None)


def test_format_instruct_counts_regex_notes(rent_game):
    from structneg.protocol import TurnEvent

    st = make_state(rent_game, [], tom_probe=False)
    methods = ["regex", "regex", "fallback", "regex", "regex"]
    for i, m in enumerate(methods):
        st.events.append(TurnEvent(i + 1, 0, "note", "n", R("$1200"), m))
    assert instruction_metrics(st, 0)[2] == 0.8


def test_soft_agreement_needs_every_issue(rent_deposit):
    both = {"rent": "$1000", "deposit": "$500"}
    st = make_state(rent_deposit, [(1, 0, both, None, {}), (1, 1, dict(both), None, {})])
    assert detect_soft_agreement(st) == (True, both)
    st = make_state(rent_deposit, [(1, 0, both, None, {}), (1, 1, {"rent": "$1000"}, None, {})])
    assert detect_soft_agreement(st) == (False, None)


def test_payoffs_and_basis(rent_game):
    st = make_state(rent_game, [(1, 0, R("$1200"), None, {}), (1, 1, R("$1200"), None, {})])
    m = compute_metrics(st)
    assert m.soft_agreement and not m.hard_agreement
    assert m.U == pytest.approx((0.7, 0.3)) and m.U_hat == m.U
    m = compute_metrics(st, payoff_basis="hard")
    assert m.U == (0.0, 0.0) and m.U_hat is None
    st.status = "aborted"
    assert compute_metrics(st).U == (0.0, 0.0)
    with pytest.raises(ValueError):
        compute_metrics(st, payoff_basis="maybe")


def test_metrics_follow_agents_when_relabeled(rent_game):
    a = [(1, 0, R("$1200"), R("$900"), R("$1100")), (1, 1, R("$800"), R("$1300"), R("$900"))]
    swapped = [(r, 1 - ag, n, t, o) for r, ag, n, t, o in a]
    m1 = compute_metrics(make_state(rent_game, a))
    st2 = make_state(rent_game, swapped)
    st2.agents[0].side, st2.agents[1].side = 1, 0
    m2 = compute_metrics(st2)
    for key in ("internal_faithfulness", "external_faithfulness", "note_instruct", "format_instruct"):
        assert getattr(m1, key) == getattr(m2, key)[::-1]


def test_to_dict_schema(rent_game):
    d = compute_metrics(make_state(rent_game, [])).to_dict()
    assert d["schema"] == 1 and d["U"] == (0.0, 0.0)
