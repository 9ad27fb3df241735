import itertools

import pytest
from hypothesis import given, settings, strategies as st

from structneg.game import (
    BUILTIN_ISSUES,
    ConfigError,
    UnknownLabel,
    builtin_game_text,
    builtin_issue,
    builtin_issue_text,
    load_game,
    normalized_utility,
    parse_game_config,
    parse_issue_config,
    payoff_for,
    rental_game,
    serialize_game,
    serialize_issue,
)

RENT_LABELS = ["$500", "$600", "$700", "$800", "$900", "$1000", "$1100", "$1200", "$1300", "$1400", "$1500"]


def test_parse_rent(rent):
    assert rent.issue_type == "distributive"
    assert rent.k == 11
    assert rent.payoffs[0] == tuple(range(11))
    assert rent.payoffs[1] == tuple(range(10, -1, -1))
    assert list(rent.payoff_labels[0]) == RENT_LABELS


def test_parse_duration(duration):
    assert duration.issue_type == "compatible"
    assert duration.payoffs[0] == duration.payoffs[1] == tuple(range(11))


def test_label_count_mismatch_rejected():
    doc = builtin_issue_text("rent").replace('"$1500"]', "]")
    with pytest.raises(ConfigError, match="length mismatch"):
        parse_issue_config(doc)


@pytest.mark.parametrize("key", ["name", "issue_type", "descriptions", "payoffs", "payoff_labels"])
def test_missing_key(key):
    import yaml
    doc = yaml.safe_load(builtin_issue_text("rent"))
    del doc[key]
    with pytest.raises(ConfigError, match=key):
        parse_issue_config(doc)


def test_unknown_type_and_monotonicity():
    import yaml
    doc = yaml.safe_load(builtin_issue_text("rent"))
    with pytest.raises(ConfigError, match="issue_type"):
        parse_issue_config({**doc, "issue_type": "integrative"})
    with pytest.raises(ConfigError, match="opposite"):
        parse_issue_config({**doc, "payoffs": [list(range(11)), list(range(11))]})
    with pytest.raises(ConfigError, match="monotonic"):
        parse_issue_config({**doc, "issue_type": "compatible"})


def test_single_entry_broadcast_needs_identical_sides():
    import yaml
    doc = yaml.safe_load(builtin_issue_text("duration"))
    short = {**doc, "descriptions": doc["descriptions"][:1], "payoffs": doc["payoffs"][:1],
             "payoff_labels": doc["payoff_labels"][:1]}
    with pytest.raises(ConfigError, match="two entries"):
        parse_issue_config(short)
    issue = parse_issue_config({**short, "identical_sides": True})
    assert issue == parse_issue_config(doc)


def test_game_default_weights(rent):
    g = parse_game_config(builtin_game_text(), [rent])
    assert g.weights == ((1.0,), (1.0,))
    assert g.parties == ("Landlord", "Tenant")


def test_game_integrative_weights():
    g = rental_game(("rent", "deposit"), [[0.25, 0.75], [0.75, 0.25]])
    assert g.is_integrative
    assert g.issue_names == ("rent", "deposit")


def test_game_weight_and_shape_errors(rent):
    deposit = builtin_issue("deposit")
    with pytest.raises(ConfigError, match="sum"):
        parse_game_config(builtin_game_text(), [rent, deposit], [[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ConfigError, match="duplicate"):
        parse_game_config({"name": "g", "description": "d", "sides": ["a", "b"], "parties": ["A", "B"],
                           "issues": [dict(yaml_rent()), dict(yaml_rent())]}, [])
    with pytest.raises(ConfigError, match="two sides"):
        parse_game_config({"name": "g", "description": "d", "sides": ["a"], "parties": ["A", "B"]}, [rent])


def yaml_rent():
    import yaml
    return yaml.safe_load(builtin_issue_text("rent"))


def test_payoff_for(rent):
    assert payoff_for(rent, 0, "$1500") == 10
    assert payoff_for(rent, 1, "$1500") == 0
    with pytest.raises(UnknownLabel):
        payoff_for(rent, 0, "$1234")


def test_normalized_utility(rent_game, rent_deposit):
    assert normalized_utility(rent_game, 0, {"rent": "$1000"}).value == 0.5
    full = normalized_utility(rent_deposit, 0, {"rent": "$1500", "deposit": "$2500"})
    assert full.value == 1.0 and not full.partial
    part = normalized_utility(rent_deposit, 0, {"rent": "$1000"})
    assert part == (0.0, True)
    with pytest.raises(UnknownLabel):
        normalized_utility(rent_game, 0, {"rent": "$1234"})


def _complete_allocations(game):
    for idx in itertools.product(*(range(i.k) for i in game.issues)):
        yield {i.name: i.payoff_labels[0][j] for i, j in zip(game.issues, idx)}


weight_vectors = st.lists(st.integers(0, 20), min_size=1, max_size=3).filter(sum).map(
    lambda xs: [x / sum(xs) for x in xs]
)


@settings(max_examples=25, deadline=None)
@given(weight_vectors)
def test_mirrored_distributive_is_zero_sum(w):
    names = ["rent", "deposit", "subletting"][: len(w)]
    g = rental_game(names, [w, w])
    for alloc in _complete_allocations(g):
        u0 = normalized_utility(g, 0, alloc).value
        u1 = normalized_utility(g, 1, alloc).value
        assert abs(u0 + u1 - 1) <= 1e-9
        assert 0 <= u0 <= 1 and 0 <= u1 <= 1


def test_compatible_monotone_alignment(duration):
    for side in (0, 1):
        p = duration.payoffs[side]
        assert all(b >= a for a, b in zip(p, p[1:]))


@pytest.mark.parametrize("name", BUILTIN_ISSUES)
def test_issue_round_trip(name):
    issue = builtin_issue(name)
    assert parse_issue_config(serialize_issue(issue)) == issue


def test_game_round_trip(tmp_path):
    g = rental_game(("rent", "duration"), [[0.3, 0.7], [0.6, 0.4]])
    again = parse_game_config(serialize_game(g), g.issues)
    assert again == g
    inline = parse_game_config(serialize_game(g, inline_issues=True), [])
    assert inline == g
    (tmp_path / "game.yaml").write_text(serialize_game(g))
    (tmp_path / "duration.yaml").write_text(serialize_issue(g.issue("duration")))
    assert load_game(tmp_path / "game.yaml") == g
