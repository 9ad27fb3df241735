"""
A negotiation between two scripted agents
=========================================

Two time-dependent conceders haggle over the monthly rent. They start at
their own best value and give ground a little every round.
"""

from structneg import rental_game
from structneg.agents import ScriptedAgent
from structneg.metrics import compute_metrics
from structneg.protocol import AgentSpec, run_negotiation

game = rental_game(("rent",))
agents = [
    AgentSpec("landlord", 0, ScriptedAgent(u_min=0.5)),
    AgentSpec("tenant", 1, ScriptedAgent(u_min=0.5)),
]
state, records = run_negotiation(game, agents, seed=0)

# The public messages, round by round
for ev in state.events:
    if ev.kind == "message":
        print(f"round {ev.round} agent {ev.agent}: {ev.text}")

m = compute_metrics(state)
print(m.status, m.agreed, m.U)

###############################################################################
# A compatible issue: both sides want the longest lease, so greedy agents
# agree straight away and both score 1.

game = rental_game(("duration",))
agents = [
    AgentSpec("landlord", 0, ScriptedAgent(family="greedy_compatible_mix")),
    AgentSpec("tenant", 1, ScriptedAgent(family="greedy_compatible_mix")),
]
state, _ = run_negotiation(game, agents)
print(compute_metrics(state).U_hat, state.rounds_used)
