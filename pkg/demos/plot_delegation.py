"""
Delegating moves between two error-prone navigators
===================================================

A Q-learning agent that always errs in its own error cells and an IBL agent
that never errs share a grid. A manager picks who moves at every step and
learns, from game results alone, whom to trust where.

Training is cut down so the script finishes in well under a minute.
"""

import numpy as np

from ibl_delegation.agents import NavAgent
from ibl_delegation.gridworld import E1, E2, EJ, add_error_states, generate_grid, render_ascii
from ibl_delegation.manager import ManagerAgent
from ibl_delegation.simulation import EpisodeConfig, evaluate_solo, evaluate_team, train_manager, train_nav_agent

episode = EpisodeConfig(l_max=100)
base = generate_grid(5, 6, 0.3, seed=4)

# Navigators learn on the clean grid first.
q = train_nav_agent(base, NavAgent.q_agent(1), 3000, episode, rng=1)
ibl = train_nav_agent(base, NavAgent.ibl_agent(2), 600, episode, rng=2)

# Then the team meets a grid with error cells: agent 1 errs every time,
# agent 2 never does.
grid = add_error_states(base, 2, [E1, E2, EJ], seed=9)
team = [q.as_member(1, 1.0), ibl.as_member(2, 0.0)]
print(render_ascii(grid))
print()


def mean_length(results):
    return np.mean([r.length for r in results])


for k, agent in enumerate(team, start=1):
    print(f"solo agent {k}: {mean_length(evaluate_solo(grid, agent, 300, episode, rng=k)):6.1f}")

random_mgr = ManagerAgent.random(2)
print(f"random manager: {mean_length(evaluate_team(grid, team, random_mgr, 300, episode, rng=3)):6.1f}")

ibl_mgr = train_manager(grid, team, ManagerAgent.ibl(2), 1500, episode, rng=4)
print(f"IBL manager:    {mean_length(evaluate_team(grid, team, ibl_mgr, 300, episode, rng=5)):6.1f}")

# Who did the trained manager pick, by cell type? The log covers the
# evaluation games only.
for (tag, agent), share in sorted(ibl_mgr.selection_frequencies().items()):
    print(f"  {tag:<5} agent {agent}: {share:.2f}")
