"""Navigating agents: tabular Q-learning and IBL policies."""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, replace

import numpy as np

from .gridworld import ACTIONS, GameAction, Position, StepOutcome
from .ibl import IBLMemory, IBLParams

GOAL_REWARD = 100.0
MOVE_REWARD = -1.0
COLLISION_REWARD = -10.0
TIMEOUT_REWARD = -100.0


class Mode(enum.Enum):
    TRAIN = "train"
    FROZEN = "frozen"


class AgentKind(str, enum.Enum):
    Q = "Q"
    IBL = "IBL"


@dataclass
class QParams:
    alpha: float = 0.9999
    alpha_decay: float = 0.9999
    epsilon: float = 0.9999
    epsilon_decay: float = 0.9999
    gamma: float = 0.9

    def __post_init__(self):
        for name in ("alpha", "alpha_decay", "epsilon", "epsilon_decay", "gamma"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.gamma >= 1:
            raise ValueError("gamma must be < 1")


class QTable:
    """State-action values; unseen entries read as 0."""

    def __init__(self, values=None):
        self.values: dict[Position, list[float]] = {}
        for (pos, action), v in (values or {}).items():
            self.set(pos, action, v)

    def __eq__(self, other):
        if not isinstance(other, QTable):
            return NotImplemented
        return self.entries() == other.entries()

    def get(self, pos, action) -> float:
        row = self.values.get(pos)
        return 0.0 if row is None else row[action]

    def set(self, pos, action, value: float) -> None:
        pos = Position(*pos)
        row = self.values.get(pos)
        if row is None:
            row = self.values[pos] = [0.0, 0.0, 0.0, 0.0]
        row[action] = float(value)

    def row(self, pos) -> list[float]:
        return self.values.get(pos) or [0.0, 0.0, 0.0, 0.0]

    def max_value(self, pos) -> float:
        return max(self.row(pos))

    def entries(self) -> dict[tuple[Position, GameAction], float]:
        return {
            (pos, GameAction(a)): v
            for pos, row in self.values.items()
            for a, v in enumerate(row)
            if v != 0.0
        }


def q_step_reward(outcome: StepOutcome, timed_out: bool = False) -> float:
    """Per-move reward for Q-learning agents.

    Goal beats everything; a move that exhausts the step budget without
    reaching the goal is the failure case, whether or not it collided.
    """
    if outcome.reached_goal:
        if timed_out:
            raise ValueError("a step cannot both reach the goal and time out")
        return GOAL_REWARD
    if timed_out:
        return TIMEOUT_REWARD
    if outcome.collided:
        return COLLISION_REWARD
    return MOVE_REWARD


def q_update(
    table: QTable,
    s,
    a,
    r: float,
    s_next,
    terminal: bool,
    params: QParams,
) -> QTable:
    """One Q-learning backup of ``Q(s, a)``, in place."""
    bootstrap = 0.0 if terminal else table.max_value(s_next)
    old = table.get(s, a)
    target = r + params.gamma * bootstrap
    table.set(s, a, (1 - params.alpha) * old + params.alpha * target)
    return table


def epsilon_greedy_action(table: QTable, s, epsilon: float, rng: np.random.Generator) -> GameAction:
    if epsilon > 0 and rng.random() < epsilon:
        return ACTIONS[int(rng.integers(4))]
    row = table.row(s)
    best = max(row)
    tied = [a for a in range(4) if row[a] == best]
    if len(tied) == 1:
        return ACTIONS[tied[0]]
    return ACTIONS[tied[int(rng.integers(len(tied)))]]


def decay_schedule(params: QParams) -> QParams:
    return replace(
        params,
        alpha=params.alpha * params.alpha_decay,
        epsilon=params.epsilon * params.epsilon_decay,
    )


@dataclass
class NavAgent:
    id: int
    kind: AgentKind
    q: QTable | None = None
    q_params: QParams | None = None
    ibl: IBLMemory | None = None
    error_prob: float = 0.0

    def __post_init__(self):
        self.kind = AgentKind(self.kind)
        if not 0 <= self.error_prob <= 1:
            raise ValueError(f"error_prob must lie in [0, 1], got {self.error_prob}")
        if self.kind is AgentKind.Q:
            if self.q is None:
                self.q = QTable()
            if self.q_params is None:
                self.q_params = QParams()
            if self.ibl is not None:
                raise ValueError("a Q agent carries no IBL memory")
        else:
            if self.ibl is None:
                self.ibl = IBLMemory()
            if self.q is not None:
                raise ValueError("an IBL agent carries no Q table")

    @classmethod
    def q_agent(cls, id=1, params: QParams | None = None, error_prob=0.0):
        return cls(id, AgentKind.Q, QTable(), params or QParams(), None, error_prob)

    @classmethod
    def ibl_agent(cls, id=1, params: IBLParams | None = None, error_prob=0.0):
        return cls(id, AgentKind.IBL, None, None, IBLMemory(params or IBLParams()), error_prob)

    def as_member(self, id: int, error_prob: float) -> "NavAgent":
        """Same policy under a new team id and error probability (policy is shared)."""
        return replace(self, id=id, error_prob=error_prob)

    def frozen_time(self) -> int:
        """Read time used for a frozen IBL policy: just after its last event."""
        return self.ibl.clock + 1

    def snapshot(self):
        if self.kind is AgentKind.Q:
            return (self.kind, self.q.entries(), self.q_params)
        return (self.kind, self.ibl.params, self.ibl.clock, self.ibl.snapshot())

    def clone(self) -> "NavAgent":
        return copy.deepcopy(self)


def nav_policy_action(
    agent: NavAgent, s, mode: Mode, now: int | None, rng: np.random.Generator
) -> GameAction:
    """Action chosen by the agent's own policy (no error injection)."""
    if agent.kind is AgentKind.Q:
        eps = agent.q_params.epsilon if mode is Mode.TRAIN else 0.0
        return epsilon_greedy_action(agent.q, s, eps, rng)
    if now is None:
        now = agent.frozen_time()
    return agent.ibl.choose(s, ACTIONS, now, rng)
