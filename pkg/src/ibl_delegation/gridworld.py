"""Gridworld environments with walls, a start/goal pair and typed error states.

Coordinates are ``(row, col)`` with ``(0, 0)`` in the top-left corner. The
boundary walls are implicit: every cell inside ``rows x cols`` is part of the
playable interior, and moving past the edge counts as a wall collision.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import InsufficientOpenCells, InvariantViolation, UnreachableAfterRetries

MAX_GENERATION_ATTEMPTS = 10_000


class Position(NamedTuple):
    row: int
    col: int


class GameAction(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3

    @property
    def offset(self) -> tuple[int, int]:
        return OFFSETS[self]


OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))
ACTIONS = tuple(GameAction)


@dataclass(frozen=True)
class ErrorTag:
    """Set of (1-based) agent ids that may err in a cell."""

    agents: frozenset

    def __post_init__(self):
        agents = frozenset(int(a) for a in self.agents)
        if not agents:
            raise ValueError("an error tag needs at least one agent")
        if min(agents) < 1:
            raise ValueError(f"agent ids are 1-based, got {sorted(agents)}")
        object.__setattr__(self, "agents", agents)

    @classmethod
    def of(cls, *agents: int) -> "ErrorTag":
        return cls(frozenset(agents))

    def affects(self, agent_id: int) -> bool:
        return agent_id in self.agents

    @property
    def label(self) -> str:
        """``E1``, ``E2`` ... for single agents, ``EJ`` for the {1, 2} joint tag."""
        ids = sorted(self.agents)
        if len(ids) == 1:
            return f"E{ids[0]}"
        if ids == [1, 2]:
            return "EJ"
        return "E" + "".join(str(i) for i in ids)

    @property
    def glyph(self) -> str:
        ids = sorted(self.agents)
        if len(ids) == 1 and ids[0] <= 9:
            return str(ids[0])
        if ids == [1, 2]:
            return "J"
        raise ValueError(f"no single-character glyph for error tag {self.label}")

    def __repr__(self):
        return f"ErrorTag({self.label})"


E1 = ErrorTag.of(1)
E2 = ErrorTag.of(2)
EJ = ErrorTag.of(1, 2)


def error_types(n_agents: int) -> list[ErrorTag]:
    """Every nonempty subset of ``{1..n_agents}``, singletons first.

    For a two-agent team this is ``[E1, E2, EJ]``.
    """
    ids = range(1, n_agents + 1)
    return [
        ErrorTag(frozenset(c))
        for size in range(1, n_agents + 1)
        for c in itertools.combinations(ids, size)
    ]


def tag_from_label(label: str) -> ErrorTag:
    if label == "EJ":
        return EJ
    if not label.startswith("E") or not label[1:].isdigit():
        raise ValueError(f"not an error tag label: {label!r}")
    return ErrorTag(frozenset(int(ch) for ch in label[1:]))


class StepOutcome(NamedTuple):
    new_pos: Position
    collided: bool
    reached_goal: bool


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    walls: frozenset
    start: Position
    goal: Position
    error_cells: Mapping = field(default_factory=dict)
    wall_ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "start", Position(*self.start))
        object.__setattr__(self, "goal", Position(*self.goal))
        object.__setattr__(self, "walls", frozenset(Position(*w) for w in self.walls))
        object.__setattr__(
            self, "error_cells", {Position(*p): t for p, t in self.error_cells.items()}
        )
        self._validate()

    def _validate(self):
        if self.rows < 1 or self.cols < 1:
            raise InvariantViolation(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        for name in ("start", "goal"):
            if not self.in_bounds(getattr(self, name)):
                raise InvariantViolation(f"{name} {tuple(getattr(self, name))} out of bounds")
        if self.start == self.goal:
            raise InvariantViolation("start and goal must differ")
        for w in self.walls:
            if not self.in_bounds(w):
                raise InvariantViolation(f"wall {tuple(w)} out of bounds")
        if self.start in self.walls or self.goal in self.walls:
            raise InvariantViolation("start/goal cannot be walls")
        for p, tag in self.error_cells.items():
            if not isinstance(tag, ErrorTag):
                raise InvariantViolation(f"error cell {tuple(p)} has no ErrorTag")
            if not self.in_bounds(p) or p in self.walls:
                raise InvariantViolation(f"error cell {tuple(p)} is not an open cell")
            if p == self.start or p == self.goal:
                raise InvariantViolation(f"error cell {tuple(p)} sits on start/goal")
        if self.start not in self.distances:
            raise InvariantViolation("goal is unreachable from start")

    def in_bounds(self, pos) -> bool:
        return 0 <= pos[0] < self.rows and 0 <= pos[1] < self.cols

    def is_open(self, pos) -> bool:
        return self.in_bounds(pos) and pos not in self.walls

    def open_cells(self) -> list[Position]:
        return [
            Position(r, c)
            for r in range(self.rows)
            for c in range(self.cols)
            if (r, c) not in self.walls
        ]

    def error_tag(self, pos) -> ErrorTag | None:
        return self.error_cells.get(pos)

    @cached_property
    def distances(self) -> dict[Position, int]:
        """Shortest move count to the goal for every cell that can reach it."""
        dist = {self.goal: 0}
        queue = deque([self.goal])
        while queue:
            cur = queue.popleft()
            d = dist[cur] + 1
            for dr, dc in OFFSETS:
                nxt = Position(cur[0] + dr, cur[1] + dc)
                if nxt not in dist and self.is_open(nxt):
                    dist[nxt] = d
                    queue.append(nxt)
        return dist

    @cached_property
    def moves(self) -> dict[Position, tuple[tuple[Position, bool], ...]]:
        """Transition table: ``moves[pos][action] == (new_pos, collided)``."""
        table = {}
        for pos in self.open_cells():
            row = []
            for dr, dc in OFFSETS:
                nxt = Position(pos[0] + dr, pos[1] + dc)
                row.append((nxt, False) if self.is_open(nxt) else (pos, True))
            table[pos] = tuple(row)
        return table

    @property
    def eligible_cells(self) -> int:
        return self.rows * self.cols - 2

    @property
    def realized_wall_ratio(self) -> float:
        return len(self.walls) / self.eligible_cells if self.eligible_cells else 0.0


def step(grid: GridSpec, pos, action) -> StepOutcome:
    dr, dc = OFFSETS[action]
    nxt = Position(pos[0] + dr, pos[1] + dc)
    if not grid.is_open(nxt):
        pos = Position(*pos)
        return StepOutcome(pos, True, pos == grid.goal)
    return StepOutcome(nxt, False, nxt == grid.goal)


def bfs_distances(grid: GridSpec) -> dict[Position, int]:
    """Shortest path lengths to the goal; unreachable open cells are absent."""
    return dict(grid.distances)


def _connected(rows: int, cols: int, walls: set, start: Position, goal: Position) -> bool:
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        if (r, c) == goal:
            return True
        for dr, dc in OFFSETS:
            nxt = (r + dr, c + dc)
            if (
                0 <= nxt[0] < rows
                and 0 <= nxt[1] < cols
                and nxt not in walls
                and nxt not in seen
            ):
                seen.add(nxt)
                queue.append(nxt)
    return False


def _monotone_path(start: Position, goal: Position, rng: np.random.Generator) -> list[Position]:
    # random interleaving of the row and column moves between start and goal
    dr = 1 if goal.row >= start.row else -1
    dc = 1 if goal.col >= start.col else -1
    moves = [(dr, 0)] * abs(goal.row - start.row) + [(0, dc)] * abs(goal.col - start.col)
    order = rng.permutation(len(moves))
    path = [start]
    r, c = start
    for i in order:
        r, c = r + moves[i][0], c + moves[i][1]
        path.append(Position(r, c))
    return path


def generate_grid(
    rows: int,
    cols: int,
    wall_ratio: float,
    start=None,
    goal=None,
    seed: int = 0,
    *,
    max_attempts: int = MAX_GENERATION_ATTEMPTS,
    carve_fallback: bool = True,
) -> GridSpec:
    """Randomly place ``round(wall_ratio * (rows*cols - 2))`` walls.

    Wall sets are drawn uniformly and rejected until start and goal are
    connected. If ``max_attempts`` draws all fail and ``carve_fallback`` is
    set, a random monotone start-to-goal path is reserved first and the walls
    are drawn uniformly from the remaining cells, which always connects.
    """
    if rows < 2 or cols < 2:
        raise ValueError(f"grid must be at least 2x2, got {rows}x{cols}")
    if not 0 <= wall_ratio < 1:
        raise ValueError(f"wall_ratio must lie in [0, 1), got {wall_ratio}")
    start = Position(0, 0) if start is None else Position(*start)
    goal = Position(rows - 1, cols - 1) if goal is None else Position(*goal)
    for p in (start, goal):
        if not (0 <= p.row < rows and 0 <= p.col < cols):
            raise ValueError(f"{tuple(p)} is outside a {rows}x{cols} grid")
    if start == goal:
        raise ValueError("start and goal must differ")

    rng = np.random.default_rng(seed)
    eligible = [
        Position(r, c)
        for r in range(rows)
        for c in range(cols)
        if (r, c) != start and (r, c) != goal
    ]
    n_walls = int(round(wall_ratio * len(eligible)))

    def build(walls):
        return GridSpec(rows, cols, frozenset(walls), start, goal, {}, wall_ratio, seed)

    for _ in range(max_attempts):
        idx = rng.choice(len(eligible), size=n_walls, replace=False)
        walls = {eligible[i] for i in idx}
        if _connected(rows, cols, walls, start, goal):
            return build(walls)

    if carve_fallback:
        path = set(_monotone_path(start, goal, rng))
        free = [p for p in eligible if p not in path]
        if n_walls <= len(free):
            idx = rng.choice(len(free), size=n_walls, replace=False)
            return build({free[i] for i in idx})
    raise UnreachableAfterRetries(
        f"no connected {rows}x{cols} layout with wall_ratio={wall_ratio} "
        f"after {max_attempts} attempts"
    )


def add_error_states(
    grid: GridSpec, count_per_type: int, types: Iterable[ErrorTag], seed: int
) -> GridSpec:
    """Tag ``count_per_type`` fresh open cells with each error type.

    Cells are taken from a seed-determined permutation of the candidate cells
    and dealt round-robin over ``types``, so a larger count under the same
    seed always extends the placement of a smaller one.
    """
    types = list(types)
    if count_per_type < 0:
        raise ValueError("count_per_type must be non-negative")
    needed = count_per_type * len(types)
    candidates = [
        p
        for p in grid.open_cells()
        if p != grid.start and p != grid.goal and p not in grid.error_cells
    ]
    if needed > len(candidates):
        raise InsufficientOpenCells(
            f"need {needed} cells for {len(types)} types x {count_per_type}, "
            f"only {len(candidates)} untagged open cells"
        )
    order = np.random.default_rng(seed).permutation(len(candidates))
    cells = dict(grid.error_cells)
    for j in range(needed):
        cells[candidates[order[j]]] = types[j % len(types)]
    return replace(grid, error_cells=cells)


WALL, OPEN, START, GOAL = "#", ".", "S", "G"


def render_ascii(grid: GridSpec, marker=None) -> str:
    """One text line per grid row; ``marker`` optionally overlays an ``@``."""
    lines = []
    for r in range(grid.rows):
        chars = []
        for c in range(grid.cols):
            p = (r, c)
            if marker is not None and p == tuple(marker):
                chars.append("@")
            elif p in grid.walls:
                chars.append(WALL)
            elif p == grid.start:
                chars.append(START)
            elif p == grid.goal:
                chars.append(GOAL)
            elif p in grid.error_cells:
                chars.append(grid.error_cells[p].glyph)
            else:
                chars.append(OPEN)
        lines.append("".join(chars))
    return "\n".join(lines)


def parse_ascii(text: str, wall_ratio: float | None = None, seed: int = 0) -> GridSpec:
    """Inverse of :func:`render_ascii`.

    The drawing carries no generation parameters; ``wall_ratio`` defaults to
    the realized fraction of walls.
    """
    lines = [ln for ln in text.strip("\n").splitlines()]
    if not lines or any(len(ln) != len(lines[0]) for ln in lines):
        raise ValueError("grid drawing must be a non-empty rectangle")
    walls, cells = set(), {}
    start = goal = None
    for r, line in enumerate(lines):
        for c, ch in enumerate(line):
            p = Position(r, c)
            if ch == WALL:
                walls.add(p)
            elif ch == START:
                start = p
            elif ch == GOAL:
                goal = p
            elif ch == "J":
                cells[p] = EJ
            elif ch.isdigit() and ch != "0":
                cells[p] = ErrorTag.of(int(ch))
            elif ch != OPEN:
                raise ValueError(f"unknown glyph {ch!r} at row {r}, col {c}")
    if start is None or goal is None:
        raise ValueError("drawing needs exactly one S and one G")
    rows, cols = len(lines), len(lines[0])
    if wall_ratio is None:
        wall_ratio = len(walls) / (rows * cols - 2)
    return GridSpec(rows, cols, frozenset(walls), start, goal, cells, wall_ratio, seed)
