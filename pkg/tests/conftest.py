import os
import socket

import pytest

from structneg.game import builtin_issue, rental_game
from structneg.protocol import AgentSpec, NegotiationConfig, NegotiationState, TurnEvent


class Silent:
    def generate(self, kind, view):
        raise AssertionError("backend should not be called")


@pytest.fixture
def rent():
    return builtin_issue("rent")


@pytest.fixture
def duration():
    return builtin_issue("duration")


@pytest.fixture
def rent_game():
    return rental_game(("rent",))


@pytest.fixture
def rent_deposit():
    return rental_game(("rent", "deposit"))


def make_state(game, turns, tom_probe=True, status="no_agreement", max_rounds=10):
    """State from ``turns``: list of (round, agent, note_offers, tom_offers, msg_offers[, note_text, msg_text])."""
    agents = (AgentSpec("x", 0, Silent()), AgentSpec("y", 1, Silent()))
    cfg = NegotiationConfig(max_rounds=max_rounds, tom_probe=tom_probe)
    st = NegotiationState(game, agents, cfg)
    for t in turns:
        rnd, agent, note, tom, msg = t[:5]
        note_text = t[5] if len(t) > 5 else "note"
        msg_text = t[6] if len(t) > 6 else "message"
        st.events.append(TurnEvent(rnd, agent, "note", note_text, note, "regex" if note else "none"))
        if tom_probe and tom is not None:
            st.events.append(TurnEvent(rnd, agent, "tom_probe", "tom", tom, "regex"))
        st.events.append(TurnEvent(rnd, agent, "message", msg_text, msg, "regex"))
        st.latest_offers[agent] = note
        st.latest_tom[agent] = tom
        st.latest_message_offers[agent] = msg
    st.status = status
    return st


# -- acceptance reporting --------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}

if os.environ.get("STRUCTNEG_NO_NETWORK"):
    def _refuse(*args, **kwargs):
        raise OSError("network access disabled for this test run")

    socket.socket.connect = _refuse
    socket.create_connection = _refuse


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:>2}. {title}" + (f"  ({detail})" if detail else ""))
