"""Episode engines for navigating-agent training, solo play and team play."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .agents import (
    AgentKind,
    Mode,
    NavAgent,
    decay_schedule,
    epsilon_greedy_action,
    nav_policy_action,
    q_step_reward,
    q_update,
)
from .gridworld import ACTIONS, GameAction, GridSpec, Position, StepOutcome
from .manager import ManagerAgent, ManagerKind, SelectionRecord, manager_commit, manager_select


@dataclass(frozen=True)
class EpisodeConfig:
    l_max: int = 150
    mode: Mode = Mode.TRAIN

    def __post_init__(self):
        if self.l_max < 1:
            raise ValueError("l_max must be at least 1")


class TraceStep(NamedTuple):
    tick: int
    pos: Position
    agent: int | None
    action: GameAction
    error_injected: bool


@dataclass
class EpisodeResult:
    success: bool
    length: int
    trajectory: list = field(default_factory=list)
    selections: list = field(default_factory=list)


def trajectory_reward(success: bool, length: int) -> float:
    """Game result credited to every instance of a trajectory."""
    if length < 0:
        raise ValueError("length must be non-negative")
    return (100.0 if success else -100.0) - length


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def error_actions(grid: GridSpec, s) -> list[GameAction]:
    """Actions that do not bring ``s`` strictly closer to the goal."""
    dist = grid.distances
    here = dist.get(s)
    out = []
    for a in ACTIONS:
        nxt = grid.moves[s][a][0]
        d = dist.get(nxt)
        if d is None or here is None or d >= here:
            out.append(a)
    return out or list(ACTIONS)


def error_action(grid: GridSpec, s, rng: np.random.Generator) -> GameAction:
    choices = error_actions(grid, s)
    return choices[int(rng.integers(len(choices)))]


def resolve_action(
    agent: NavAgent,
    grid: GridSpec,
    s,
    mode: Mode,
    now: int | None,
    rng: np.random.Generator,
) -> tuple[GameAction, bool]:
    """Policy action, or an injected error when ``s`` is one of the agent's error cells."""
    tag = grid.error_cells.get(s)
    if tag is not None and agent.id in tag.agents:
        if rng.random() < agent.error_prob:
            return error_action(grid, s, rng), True
    return nav_policy_action(agent, s, mode, now, rng), False


def run_nav_training_episode(
    grid: GridSpec, agent: NavAgent, cfg: EpisodeConfig, rng: np.random.Generator
) -> EpisodeResult:
    """One training game on an error-free grid."""
    if grid.error_cells:
        raise ValueError("navigating agents train on error-free grids")
    moves, goal, l_max = grid.moves, grid.goal, cfg.l_max
    pos = grid.start
    trajectory = []
    success = False

    if agent.kind is AgentKind.Q:
        table, params = agent.q, agent.q_params
        for i in range(l_max):
            action = epsilon_greedy_action(table, pos, params.epsilon, rng)
            nxt, collided = moves[pos][action]
            reached = nxt == goal
            timed_out = not reached and i == l_max - 1
            r = q_step_reward(StepOutcome(nxt, collided, reached), timed_out)
            q_update(table, pos, action, r, nxt, reached or timed_out, params)
            trajectory.append(TraceStep(i + 1, pos, agent.id, action, False))
            pos = nxt
            if reached:
                success = True
                break
        return EpisodeResult(success, len(trajectory), trajectory)

    memory = agent.ibl
    buffer = []
    for _ in range(l_max):
        now = memory.tick()
        action = memory.choose(pos, ACTIONS, now, rng)
        buffer.append((pos, action, now))
        trajectory.append(TraceStep(now, pos, agent.id, action, False))
        pos = moves[pos][action][0]
        if pos == goal:
            success = True
            break
    memory.commit(buffer, trajectory_reward(success, len(trajectory)))
    return EpisodeResult(success, len(trajectory), trajectory)


def train_nav_agent(
    grid: GridSpec,
    agent: NavAgent,
    episodes: int,
    cfg: EpisodeConfig | None = None,
    rng=0,
) -> NavAgent:
    """Train in place; Q agents anneal alpha and epsilon after every episode."""
    cfg = cfg or EpisodeConfig()
    rng = _rng(rng)
    for _ in range(episodes):
        run_nav_training_episode(grid, agent, cfg, rng)
        if agent.kind is AgentKind.Q:
            agent.q_params = decay_schedule(agent.q_params)
    return agent


def run_solo_episode(
    grid: GridSpec, agent: NavAgent, cfg: EpisodeConfig, rng: np.random.Generator
) -> EpisodeResult:
    """A frozen agent plays alone, erring in its own error cells."""
    moves, goal = grid.moves, grid.goal
    pos = grid.start
    trajectory = []
    for i in range(cfg.l_max):
        action, injected = resolve_action(agent, grid, pos, Mode.FROZEN, None, rng)
        trajectory.append(TraceStep(i + 1, pos, agent.id, action, injected))
        pos = moves[pos][action][0]
        if pos == goal:
            return EpisodeResult(True, len(trajectory), trajectory)
    return EpisodeResult(False, len(trajectory), trajectory)


def evaluate_solo(
    grid: GridSpec, agent: NavAgent, episodes: int, cfg: EpisodeConfig | None = None, rng=0
) -> list[EpisodeResult]:
    cfg = cfg or EpisodeConfig(mode=Mode.FROZEN)
    rng = _rng(rng)
    return [run_solo_episode(grid, agent, cfg, rng) for _ in range(episodes)]


def run_team_episode(
    grid: GridSpec,
    agents: Sequence[NavAgent],
    mgr: ManagerAgent,
    cfg: EpisodeConfig,
    rng: np.random.Generator,
) -> EpisodeResult:
    """One game where the manager delegates every move.

    In ``TRAIN`` mode an IBL manager ticks its clock once per decision and
    commits the game result at the end; in ``FROZEN`` mode it reads at a
    fixed time and learns nothing. Navigating agents are always frozen.
    """
    if len(agents) != mgr.team_size:
        raise ValueError(f"manager expects {mgr.team_size} agents, got {len(agents)}")
    learning = cfg.mode is Mode.TRAIN and mgr.kind is ManagerKind.IBL
    memory = mgr.memory
    moves, goal = grid.moves, grid.goal
    pos = grid.start
    trajectory, selections = [], []
    success = False
    for i in range(cfg.l_max):
        if learning:
            now = memory.tick()
        elif memory is not None:
            now = memory.clock + 1
        else:
            now = i + 1
        tag = grid.error_cells.get(pos)
        chosen = manager_select(mgr, pos, now, rng, tag)
        action, injected = resolve_action(agents[chosen - 1], grid, pos, Mode.FROZEN, None, rng)
        selections.append(SelectionRecord(pos, chosen, now))
        trajectory.append(TraceStep(now, pos, chosen, action, injected))
        pos = moves[pos][action][0]
        if pos == goal:
            success = True
            break
    if learning:
        manager_commit(mgr, selections, trajectory_reward(success, len(trajectory)))
    return EpisodeResult(success, len(trajectory), trajectory, selections)


def train_manager(
    grid: GridSpec,
    agents: Sequence[NavAgent],
    mgr: ManagerAgent,
    games: int,
    cfg: EpisodeConfig | None = None,
    rng=0,
) -> ManagerAgent:
    cfg = EpisodeConfig(cfg.l_max if cfg else 150, Mode.TRAIN)
    rng = _rng(rng)
    for _ in range(games):
        run_team_episode(grid, agents, mgr, cfg, rng)
    return mgr


def evaluate_team(
    grid: GridSpec,
    agents: Sequence[NavAgent],
    mgr: ManagerAgent,
    episodes: int,
    cfg: EpisodeConfig | None = None,
    rng=0,
) -> list[EpisodeResult]:
    """Frozen-manager games; the selection log is reset first so it covers these games only."""
    cfg = EpisodeConfig(cfg.l_max if cfg else 150, Mode.FROZEN)
    rng = _rng(rng)
    mgr.reset_log()
    return [run_team_episode(grid, agents, mgr, cfg, rng) for _ in range(episodes)]


def final_position(grid: GridSpec, result: EpisodeResult) -> Position:
    if not result.trajectory:
        return grid.start
    last = result.trajectory[-1]
    return grid.moves[last.pos][last.action][0]
