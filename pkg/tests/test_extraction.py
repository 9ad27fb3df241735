import pytest
from hypothesis import given, settings, strategies as st

from structneg.extraction import (
    SynonymFallback,
    canonicalize_label,
    extract_message_offers,
    extract_note_offers,
)
from structneg.game import rental_game

MALFORMED_NOTE = """Mental note:
1. Remember the negotiation rules and payoff tables.
2. Reflect on the negotiations transcript so far.
3. For all issues, think about strategies to maximize total payoff.

Possible offer:
{
"rent": $1,425,
"duration": 32 months
}
"""


@pytest.fixture
def rent_duration():
    return rental_game(("rent", "duration"))


def test_fenced_json_note(rent_game):
    note = 'Thinking.\n\nacceptable offer format:\n```json{\n    "rent": "$1200"\n}```'
    res = extract_note_offers(note, rent_game, 0)
    assert res.offers == {"rent": "$1200"}
    assert res.method == "regex"
    assert res.unresolved == ()


def test_malformed_note_routes_to_fallback(rent_duration):
    fb = SynonymFallback()
    res = extract_note_offers(MALFORMED_NOTE, rent_duration, 0, fb)
    assert fb.calls == 1
    assert res.method == "fallback"
    # neither $1425 nor 32 months is on the table
    assert res.offers == {}
    assert set(res.unresolved) == {"rent", "duration"}


def test_malformed_note_without_fallback(rent_duration):
    res = extract_note_offers(MALFORMED_NOTE, rent_duration, 0)
    assert res.method == "none" and res.offers == {}


def test_empty_note(rent_game):
    res = extract_note_offers("", rent_game, 0)
    assert res.offers == {} and res.unresolved == ("rent",)


def test_fallback_fills_residual_issue(rent_duration):
    note = '```json{"rent": "$1200", "duration": "three years"}```'
    fb = SynonymFallback({"duration": {"three years": "36 months"}})
    res = extract_note_offers(note, rent_duration, 0, fb)
    assert res.offers == {"rent": "$1200", "duration": "36 months"}
    assert res.method == "fallback"


def test_lenient_fallback_on_unquoted_values(rent_duration):
    note = '{\n"rent": $1,200,\n"duration": 36 months\n}'
    res = extract_note_offers(note, rent_duration, 0, SynonymFallback())
    assert res.offers == {"rent": "$1200", "duration": "36 months"}


@pytest.mark.parametrize("raw,expected", [
    ("$1200", "$1200"),
    ("1200", "$1200"),
    ("$1,200", "$1200"),
    ("1,200 dollars", "$1200"),
    ("1,425 dollars", None),
    ("$1234", None),
])
def test_canonicalize_rent(rent, raw, expected):
    assert canonicalize_label(raw, rent, 0) == expected


@pytest.mark.parametrize("raw,expected", [
    ("36 months", "36 months"),
    ("36 Months", "36 months"),
    ("12 month", "12 months"),
    ("32 months", None),
    ("$36", None),
])
def test_canonicalize_duration(duration, raw, expected):
    assert canonicalize_label(raw, duration, 0) == expected


def test_message_with_shared_values():
    g = rental_game(("rent", "deposit"))
    res = extract_message_offers("I propose rent of $1100 with a $500 deposit", g, 1)
    assert res.offers == {"rent": "$1100", "deposit": "$500"}
    res = extract_message_offers("I propose deposit: $500, rent: $1000.", g, 1)
    assert res.offers == {"rent": "$1000", "deposit": "$500"}


def test_message_recency(rent_game):
    res = extract_message_offers("I could do $1300 ... fine, $1200", rent_game, 0)
    assert res.offers == {"rent": "$1200"}


def test_message_ignores_unit_less_numbers(rent_duration):
    res = extract_message_offers("In round 7 of 10 I offer 36 months.", rent_duration, 0)
    assert res.offers == {"duration": "36 months"}


def test_no_subletting_needs_fallback():
    g = rental_game(("subletting",))
    res = extract_message_offers("no subletting", g, 0)
    assert res.offers == {} and res.unresolved == ("subletting",)
    res = extract_message_offers("no subletting", g, 0, SynonymFallback())
    assert res.offers == {"subletting": "0 days"}
    assert res.method == "fallback"


def test_stage_one_is_deterministic(rent_duration):
    text = "rent $1300 and 24 months"
    assert extract_message_offers(text, rent_duration, 0) == extract_message_offers(text, rent_duration, 0)


fragments = st.sampled_from([
    "$1200", "$1,425", "1200 dollars", "36 months", "32 months", "rent", "duration", "deposit",
    "$500", "$2500", "no subletting", "7 days", "1 day", "```json{", "}```", '"rent": ', ",", "{", "}",
    "We agree on all issues.", "round 3", "\n",
])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(fragments, st.text(max_size=8)), max_size=12), st.integers(0, 1))
def test_extracted_labels_are_on_the_table(parts, side):
    g = rental_game(("rent", "duration", "deposit", "subletting"))
    text = " ".join(parts)
    for res in (
        extract_note_offers(text, g, side, SynonymFallback()),
        extract_message_offers(text, g, side, SynonymFallback()),
        extract_message_offers(text, g, side),
    ):
        for name, label in res.offers.items():
            assert label in g.issue(name).payoff_labels[side]
        assert set(res.offers).isdisjoint(res.unresolved)
