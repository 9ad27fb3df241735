"""Reference scores: the closed-form distributive optimum and an exhaustive
utility frontier used as its oracle (and as the only answer for games with
compatible issues)."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import WEIGHT_TOL, Game

DEFAULT_FRONTIER_CAP = 10**6


class FrontierTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class OptimalScore:
    per_side_optimum: float
    combined_max: float
    method: str  # "closed_form_distributive" | "brute_force"


def _check_weights(w: Sequence[float], name: str) -> None:
    if any(x < 0 for x in w):
        raise ValueError(f"{name} has negative entries")
    if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
        raise ValueError(f"{name} sums to {math.fsum(w)}, not 1")


def optimal_distributive_score(weights_a: Sequence[float], weights_b: Sequence[float]) -> OptimalScore:
    """Best equal split for two sides dividing distributive issues.

    Each issue goes wholly to whichever side weights it more (ties split
    evenly), so the combined value is ``sum(max(a_i, b_i))`` and each side
    can be held to half of it.
    """
    if len(weights_a) != len(weights_b):
        raise ValueError(f"weight vectors differ in length ({len(weights_a)} vs {len(weights_b)})")
    _check_weights(weights_a, "weights_a")
    _check_weights(weights_b, "weights_b")
    combined = math.fsum(max(a, b) for a, b in zip(weights_a, weights_b))
    return OptimalScore(combined / 2, combined, "closed_form_distributive")


def optimal_allocation_shares(weights_a: Sequence[float], weights_b: Sequence[float]) -> list[float]:
    """Share of each issue awarded to side a in the combined-value maximizer."""
    return [1.0 if a > b else 0.0 if a < b else 0.5 for a, b in zip(weights_a, weights_b)]


@dataclass(frozen=True)
class FrontierPoint:
    labels: tuple[str, ...]
    u0: float
    u1: float
    pareto: bool


def _pareto_mask(u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    # Rounded so that float noise does not split ties.
    a = np.round(u0, 12)
    b = np.round(u1, 12)
    order = np.lexsort((-b, -a))  # by u0 desc, then u1 desc
    mask = np.zeros(len(a), dtype=bool)
    best_u1_higher_u0 = -np.inf
    i = 0
    n = len(order)
    while i < n:
        j = i
        while j < n and a[order[j]] == a[order[i]]:
            j += 1
        group = order[i:j]
        top = b[group[0]]
        if top > best_u1_higher_u0:
            mask[group[b[group] == top]] = True
        best_u1_higher_u0 = max(best_u1_higher_u0, top)
        i = j
    return mask


def brute_force_frontier(game: Game, cap: int = DEFAULT_FRONTIER_CAP) -> list[FrontierPoint]:
    """Utility pair of every complete allocation, with Pareto-optimal ones flagged.

    Points are ordered as ``itertools.product`` over label indices.
    """
    size = math.prod(i.k for i in game.issues)
    if size > cap:
        raise FrontierTooLarge(f"{size} allocations exceeds cap {cap}")
    per_issue = []
    for side in (0, 1):
        cols = [
            game.weights[side][n] * np.asarray(issue.payoffs[side]) / issue.max_payoff(side)
            for n, issue in enumerate(game.issues)
        ]
        grids = np.meshgrid(*cols, indexing="ij")
        per_issue.append(sum(g.ravel() for g in grids) if grids else np.zeros(1))
    u0, u1 = per_issue
    mask = _pareto_mask(u0, u1)
    points = []
    for flat, idx in enumerate(itertools.product(*(range(i.k) for i in game.issues))):
        labels = tuple(issue.payoff_labels[0][j] for issue, j in zip(game.issues, idx))
        points.append(FrontierPoint(labels, float(u0[flat]), float(u1[flat]), bool(mask[flat])))
    return points


def frontier_optimum(game: Game, cap: int = DEFAULT_FRONTIER_CAP) -> OptimalScore:
    """Half of the largest combined utility over all complete allocations."""
    pts = brute_force_frontier(game, cap)
    combined = max(p.u0 + p.u1 for p in pts)
    return OptimalScore(combined / 2, combined, "brute_force")


def classify_game(game: Game) -> str:
    """``competitive`` for pure-conflict games (distributive issues, equal
    weights across sides), ``cooperative`` otherwise."""
    if all(i.issue_type == "distributive" for i in game.issues) and not game.is_integrative:
        return "competitive"
    return "cooperative"


def optimal_score(game: Game) -> OptimalScore | None:
    """Closed form for distributive-only games; ``None`` when compatible issues
    make the optimum depend on a bargaining solution concept."""
    if any(i.issue_type != "distributive" for i in game.issues):
        return None
    return optimal_distributive_score(game.weights[0], game.weights[1])


def frontier_csv(game: Game, points: Sequence[FrontierPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*game.issue_names, "u0", "u1", "pareto"])
    for p in points:
        w.writerow([*p.labels, f"{p.u0:.12g}", f"{p.u1:.12g}", int(p.pareto)])
    return buf.getvalue()
