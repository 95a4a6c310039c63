"""
Gridworlds, shortest paths and error cells
==========================================

A tour of the environment: generate a walled grid, look at its BFS
distance field, then tag cells where one agent or the other goes wrong.
"""

import numpy as np

from ibl_delegation.gridworld import E1, E2, EJ, add_error_states, generate_grid, render_ascii
from ibl_delegation.simulation import error_actions

# A 6x8 grid with 40% of the free cells walled off. The generator keeps
# drawing until the goal is reachable from the start.
grid = generate_grid(6, 8, 0.4, seed=3)
print(render_ascii(grid))
print()

# Distances are BFS steps to the goal. Walls and sealed pockets are absent.
dist = np.full((grid.rows, grid.cols), -1)
for (r, c), d in grid.distances.items():
    dist[r, c] = d
print(dist)
print("optimal game length:", grid.distances[grid.start])
print()

# Error cells come in three flavours: agent 1 only, agent 2 only, and
# joint. Two of each here; raising the count keeps the old cells.
level2 = add_error_states(grid, 2, [E1, E2, EJ], seed=7)
level3 = add_error_states(grid, 3, [E1, E2, EJ], seed=7)
print(render_ascii(level2))
print()
assert level2.error_cells.items() <= level3.error_cells.items()

# An agent that errs in a cell picks uniformly among the moves that do not
# bring it closer to the goal.
for cell, tag in sorted(level2.error_cells.items()):
    names = [a.name for a in error_actions(level2, cell)]
    print(f"{tag.label} at {tuple(cell)}: error moves {names}")
