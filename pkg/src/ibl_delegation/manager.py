"""The delegating manager.

Each step the manager picks which team member decides the move. It never
sees the move itself: its IBL instances are ``(cell, agent id, game result)``.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .gridworld import ErrorTag
from .ibl import IBLMemory, IBLParams

PLAIN = "plain"


class ManagerKind(str, enum.Enum):
    IBL = "IBL"
    RANDOM = "Random"


class SelectionRecord(NamedTuple):
    state: tuple
    chosen: int
    time: int


def tag_label(tag: ErrorTag | None) -> str:
    return PLAIN if tag is None else tag.label


@dataclass
class ManagerAgent:
    kind: ManagerKind
    team_size: int
    memory: IBLMemory | None = None
    selection_log: Counter = field(default_factory=Counter)

    def __post_init__(self):
        self.kind = ManagerKind(self.kind)
        if self.team_size < 1:
            raise ValueError("team_size must be at least 1")
        if self.kind is ManagerKind.IBL and self.memory is None:
            self.memory = IBLMemory()
        if self.kind is ManagerKind.RANDOM and self.memory is not None:
            raise ValueError("a random manager has no memory")

    @classmethod
    def ibl(cls, team_size: int, params: IBLParams | None = None) -> "ManagerAgent":
        return cls(ManagerKind.IBL, team_size, IBLMemory(params or IBLParams()))

    @classmethod
    def random(cls, team_size: int) -> "ManagerAgent":
        return cls(ManagerKind.RANDOM, team_size)

    @property
    def agent_ids(self) -> tuple[int, ...]:
        return tuple(range(1, self.team_size + 1))

    def selection_frequencies(self) -> dict[tuple[str, int], float]:
        """Share of selections per agent within each cell tag."""
        totals = Counter()
        for (tag, _), n in self.selection_log.items():
            totals[tag] += n
        return {
            (tag, agent): n / totals[tag]
            for (tag, agent), n in sorted(self.selection_log.items())
            if totals[tag]
        }

    def reset_log(self) -> None:
        self.selection_log = Counter()


def manager_select(
    mgr: ManagerAgent,
    s,
    now: int,
    rng: np.random.Generator,
    tag: ErrorTag | None = None,
) -> int:
    """Pick the acting agent for cell ``s``; ``tag`` buckets the selection log."""
    if mgr.team_size == 1:
        chosen = 1
    elif mgr.kind is ManagerKind.RANDOM:
        chosen = int(rng.integers(mgr.team_size)) + 1
    else:
        chosen = mgr.memory.choose(s, mgr.agent_ids, now, rng)
    mgr.selection_log[(tag_label(tag), chosen)] += 1
    return chosen


def manager_commit(mgr: ManagerAgent, selections: Sequence[SelectionRecord], outcome: float) -> ManagerAgent:
    if mgr.kind is ManagerKind.IBL:
        mgr.memory.commit(((sel.state, sel.chosen, sel.time) for sel in selections), outcome)
    return mgr
