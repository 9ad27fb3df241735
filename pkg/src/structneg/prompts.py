"""Prompt text and initialization-context rendering."""

from __future__ import annotations

from importlib import resources

import yaml

from .game import Game

AGREEMENT_PHRASE = "We agree on all issues."

NOTE_PROMPT = (
    "Use the following strategy to compose a mental note to order your thoughts:\n"
    "1. Remember the negotiation rules and your payoff tables\n"
    "2. Reflect on the negotiations transcript so far\n"
    "3. For all issues, think about strategies to maximize your total payoff\n"
    "Your note can not exceed {max_len} words."
)

OFFER_FORMAT_INTRO = "Finally, for each of the issues write what you believe to be an acceptable offer."

MESSAGE_PROMPT = (
    "Your negotiating partner is sitting across from you.\n"
    "Formulate a response to your negotiating partner using the following strategy:\n"
    "1. Reflect on the negotiations transcript so far\n"
    "2. Remember the negotiation rules and your payoff tables\n"
    "3. Try to further the state of negotiations on at least one issue\n"
    "Your note can not exceed {max_len} words."
)

TOM_PROMPT = (
    "Before making your next offer, consider the negotiation from the point of view "
    "of your negotiating partner ({opponent}).\n"
    "For each of the issues write what you believe your negotiating partner would "
    "accept as an offer."
)

AGREEMENT_INSTRUCTION = (
    'When you are both in full agreement, state the exact phrase "{phrase}" in your message.'
)

ABILITY_TEXT = {
    "default": "",
    "expert": "You are an expert-level negotiator.",
    "awful": "You are an awful negotiator.",
}


def _load_rules() -> tuple[str, list[str]]:
    text = resources.files("structneg").joinpath("data", "rules.yaml").read_text(encoding="utf-8")
    doc = yaml.safe_load(text)
    return doc["rules_prompt"], list(doc["rules"])


RULES_PROMPT, RULES = _load_rules()


def offer_format_block(issue_names) -> str:
    """The fenced-JSON acceptable-offer template with the game's issue names."""
    lines = [f'    "{name}": "<acceptable offer>"' for name in issue_names]
    body = ",\n".join(lines)
    return f"acceptable offer format:\n```json{{\n{body}\n}}```"


def render_payoff_table(game: Game, side: int, show_side: int | None = None) -> str:
    """Markdown-style table of labels and ``show_side``'s payoffs for each issue."""
    show_side = side if show_side is None else show_side
    blocks = []
    for n, issue in enumerate(game.issues):
        rows = [f"| {issue.name} | payoff |", "| --- | --- |"]
        for label, p in zip(issue.payoff_labels[side], issue.payoffs[show_side]):
            v = int(p) if float(p).is_integer() else p
            rows.append(f"| {label} | {v} |")
        weight = game.weights[show_side][n]
        blocks.append(f"{issue.descriptions[side]}\nIssue importance: {weight:.2f}\n" + "\n".join(rows))
    return "\n\n".join(blocks)


def render_rules() -> str:
    return RULES_PROMPT + "\n" + "\n".join(f"- {r}" for r in RULES)


def render_initialization(
    game: Game,
    side: int,
    agent: int,
    visibility_level: int = 1,
    ability: str | None = None,
    opponent_ability: str | None = None,
    phrase: str = AGREEMENT_PHRASE,
) -> str:
    """Game setting, role, payoff table(s) and rules for one agent.

    Visibility 1 names the opponent's title, 2 adds the opponent's payoff
    table, 3 adds the opponent's ability description.
    """
    if visibility_level not in (1, 2, 3):
        raise ValueError(f"visibility_level must be 1, 2 or 3, got {visibility_level}")
    other = 1 - side
    parts = [
        game.description,
        game.sides[side],
        f"You are agent {agent}, representing the {game.parties[side]}. "
        f"You are negotiating with a representative of the {game.parties[other]}.",
    ]
    if ability:
        parts.append(ABILITY_TEXT.get(ability, ability))
    parts.append("Your payoff tables:\n" + render_payoff_table(game, side))
    if visibility_level >= 2:
        parts.append(
            f"Payoff tables of the {game.parties[other]}:\n" + render_payoff_table(game, side, other)
        )
    if visibility_level >= 3:
        text = ABILITY_TEXT.get(opponent_ability or "default", opponent_ability or "")
        if text:
            parts.append(f"About the representative of the {game.parties[other]}: " + text.replace("You are", "They are"))
    parts.append(render_rules())
    parts.append(AGREEMENT_INSTRUCTION.format(phrase=phrase))
    return "\n\n".join(p for p in parts if p)


def round_banner(round_: int, max_rounds: int) -> str:
    return (
        f"This is negotiation round {round_} of {max_rounds}. "
        f"Rounds remaining after this one: {max_rounds - round_}."
    )
