"""
How much can two sides get out of a game?
=========================================

Compute the best equal per-side score for a few weight settings and compare
the closed form with a brute-force sweep of every allocation.
"""

from structneg import rental_game
from structneg.scoring import brute_force_frontier, frontier_optimum, optimal_distributive_score

# Identical preferences: whatever one side wins the other loses.
print(optimal_distributive_score([0.5, 0.5], [0.5, 0.5]))

# Opposite priorities leave room for a trade.
print(optimal_distributive_score([0.8, 0.2], [0.2, 0.8]))

# The same game built from the bundled rental issues, solved by enumeration.
game = rental_game(("rent", "deposit"), [[0.8, 0.2], [0.2, 0.8]])
print(frontier_optimum(game))

# A handful of Pareto-efficient points of the frontier
points = [p for p in brute_force_frontier(game) if p.pareto]
for p in points[:5]:
    print(p.labels, round(p.u0, 3), round(p.u1, 3))
