"""Sweep harness: grid suites, scenario matrix, aggregation.

Every (grid, level, scenario, condition) cell draws from its own seed derived
from the master seed, so cells can run in any order or process and the
merged output does not depend on scheduling.
"""

from __future__ import annotations

import hashlib
import logging
import statistics
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .agents import AgentKind, NavAgent, QParams
from .errors import EmptyGroup, InsufficientOpenCells
from .gridworld import GridSpec, add_error_states, error_types, generate_grid
from .ibl import IBLParams
from .manager import ManagerAgent
from .simulation import EpisodeConfig, evaluate_solo, evaluate_team, train_manager, train_nav_agent

log = logging.getLogger(__name__)

RANDOM_MGR = "random-mgr"
IBL_MGR = "ibl-mgr"


@dataclass(frozen=True)
class ScenarioSpec:
    team: tuple  # ((AgentKind, error_prob), ...)
    label: str

    def __post_init__(self):
        team = tuple((AgentKind(k), float(p)) for k, p in self.team)
        if not team:
            raise ValueError("a scenario needs at least one agent")
        for _, p in team:
            if not 0 <= p <= 1:
                raise ValueError(f"error probability {p} outside [0, 1]")
        object.__setattr__(self, "team", team)

    @property
    def size(self) -> int:
        return len(self.team)

    def conditions(self) -> list[str]:
        return [f"solo-{i}" for i in range(1, self.size + 1)] + [RANDOM_MGR, IBL_MGR]


BALANCED = ScenarioSpec(((AgentKind.Q, 0.25), (AgentKind.IBL, 0.25)), "balanced-25-25")
IMBALANCED = ScenarioSpec(((AgentKind.Q, 0.25), (AgentKind.IBL, 0.75)), "imbalanced-25-75")
DIVERGENT = ScenarioSpec(((AgentKind.Q, 1.0), (AgentKind.IBL, 0.0)), "divergent-100-0")
PAPER_SCENARIOS = (BALANCED, IMBALANCED, DIVERGENT)


@dataclass(frozen=True)
class SweepConfig:
    grids: int = 3
    rows: int = 6
    cols: int = 8
    wall_ratio: float = 0.4
    level_counts: tuple = (1, 2, 3, 4, 5)
    nav_episodes: int = 20_000
    manager_games: int = 5_000
    eval_episodes: int = 500
    l_max: int = 150
    replications: int = 1
    master_seed: int = 0

    def __post_init__(self):
        levels = tuple(int(c) for c in self.level_counts)
        object.__setattr__(self, "level_counts", levels)
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"level_counts must be strictly increasing, got {levels}")
        if not levels or levels[0] < 1:
            raise ValueError("level_counts must be non-empty and positive")
        for name in ("grids", "eval_episodes", "replications", "l_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.nav_episodes < 0 or self.manager_games < 0:
            raise ValueError("episode counts must be non-negative")


PROFILES = {
    "desk": SweepConfig(),
    "paper": SweepConfig(
        grids=25,
        rows=10,
        cols=15,
        wall_ratio=0.6,
        level_counts=tuple(range(2, 15)),
        nav_episodes=150_000,
        manager_games=20_000,
    ),
}


@dataclass
class LevelRecord:
    grid_id: int
    level: int
    scenario: str
    condition: str
    mean_length: float
    length_variance: float
    success_rate: float
    selection_freq: dict = field(default_factory=dict)  # (tag label, agent) -> fraction

    @property
    def key(self) -> tuple:
        return (self.grid_id, self.level, self.scenario, self.condition)


@dataclass
class AggregateRecord:
    scenario: str
    level: int
    condition: str
    mean: float
    variance: float
    n_grids: int
    success_rate: float = 1.0
    selection_freq: dict = field(default_factory=dict)


@dataclass
class GridSuiteEntry:
    grid_id: int
    base: GridSpec
    variants: dict  # level -> GridSpec
    warnings: list = field(default_factory=list)


def derive_seed(*parts) -> int:
    """Stable unsigned 64-bit seed from any tuple of simple values."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def build_grid_suite(cfg: SweepConfig, n_agents: int = 2) -> list[GridSuiteEntry]:
    types = error_types(n_agents)
    suite = []
    for g in range(cfg.grids):
        base = generate_grid(
            cfg.rows, cfg.cols, cfg.wall_ratio, seed=derive_seed(cfg.master_seed, "grid", g)
        )
        err_seed = derive_seed(cfg.master_seed, "errors", g)
        entry = GridSuiteEntry(g, base, {})
        for level in cfg.level_counts:
            try:
                entry.variants[level] = add_error_states(base, level, types, err_seed)
            except InsufficientOpenCells as exc:
                msg = f"grid {g}: levels from {level} on dropped ({exc})"
                log.warning(msg)
                entry.warnings.append(msg)
                break
        suite.append(entry)
    return suite


def _train_member(args) -> NavAgent:
    cfg, grid, kind, slot, ibl_params, q_params = args
    seed = derive_seed(cfg.master_seed, "nav", grid.seed, kind.value, slot)
    if kind is AgentKind.Q:
        agent = NavAgent.q_agent(slot, replace(q_params))
    else:
        agent = NavAgent.ibl_agent(slot, replace(ibl_params))
    return train_nav_agent(grid, agent, cfg.nav_episodes, EpisodeConfig(cfg.l_max), seed)


def _summarize(lengths, successes, selections: Counter) -> tuple:
    lengths = np.asarray(lengths, dtype=float)
    var = float(lengths.var(ddof=1)) if lengths.size > 1 else 0.0
    totals = Counter()
    for (tag, _), n in selections.items():
        totals[tag] += n
    freq = {k: n / totals[k[0]] for k, n in sorted(selections.items()) if totals[k[0]]}
    return float(lengths.mean()), var, float(np.mean(successes)), freq


def run_cell(args) -> LevelRecord:
    """Evaluate one (grid, level, scenario, condition) cell, pooling replications."""
    cfg, grid_id, level, grid, scenario, condition, members, ibl_params = args
    episode = EpisodeConfig(cfg.l_max)
    lengths, successes, selections = [], [], Counter()
    for rep in range(cfg.replications):
        seed = derive_seed(cfg.master_seed, grid_id, level, scenario.label, condition, rep)
        rng = np.random.default_rng(seed)
        if condition.startswith("solo-"):
            agent = members[int(condition[5:]) - 1]
            results = evaluate_solo(grid, agent, cfg.eval_episodes, episode, rng)
        else:
            if condition == IBL_MGR:
                mgr = ManagerAgent.ibl(len(members), replace(ibl_params))
                train_manager(grid, members, mgr, cfg.manager_games, episode, rng)
            else:
                mgr = ManagerAgent.random(len(members))
            results = evaluate_team(grid, members, mgr, cfg.eval_episodes, episode, rng)
            selections.update(mgr.selection_log)
        lengths.extend(r.length for r in results)
        successes.extend(r.success for r in results)
    mean, var, success_rate, freq = _summarize(lengths, successes, selections)
    return LevelRecord(grid_id, level, scenario.label, condition, mean, var, success_rate, freq)


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def run_sweep(
    cfg: SweepConfig,
    scenarios: Sequence[ScenarioSpec] = PAPER_SCENARIOS,
    ibl_params: IBLParams | None = None,
    q_params: QParams | None = None,
    workers: int = 1,
    suite: list[GridSuiteEntry] | None = None,
) -> list[LevelRecord]:
    """Train navigators per grid, then evaluate every scenario cell.

    Output rows are sorted by (grid_id, level, scenario, condition) and are
    identical for any ``workers`` value.
    """
    ibl_params = ibl_params or IBLParams()
    q_params = q_params or QParams()
    n_agents = max(s.size for s in scenarios)
    if suite is None:
        suite = build_grid_suite(cfg, n_agents)

    slots = sorted({(kind, i + 1) for s in scenarios for i, (kind, _) in enumerate(s.team)})
    nav_tasks = [
        (cfg, entry.base, kind, slot, ibl_params, q_params)
        for entry in suite
        for kind, slot in slots
    ]
    trained = dict(
        zip(
            [(entry.grid_id, kind, slot) for entry in suite for kind, slot in slots],
            _map(_train_member, nav_tasks, workers),
        )
    )

    cell_tasks = []
    for entry in suite:
        for level, grid in entry.variants.items():
            for scenario in scenarios:
                members = [
                    trained[(entry.grid_id, kind, i + 1)].as_member(i + 1, p)
                    for i, (kind, p) in enumerate(scenario.team)
                ]
                for condition in scenario.conditions():
                    cell_tasks.append(
                        (cfg, entry.grid_id, level, grid, scenario, condition, members, ibl_params)
                    )
    records = _map(run_cell, cell_tasks, workers)
    return sorted(records, key=lambda r: r.key)


def aggregate_records(records: Sequence[LevelRecord]) -> list[AggregateRecord]:
    """Mean and sample variance of per-grid mean lengths for each (scenario, level, condition)."""
    if not records:
        raise EmptyGroup("nothing to aggregate")
    groups = defaultdict(list)
    for r in records:
        groups[(r.scenario, r.level, r.condition)].append(r)
    out = []
    for (scenario, level, condition), rows in sorted(groups.items()):
        rows = sorted(rows, key=lambda r: r.grid_id)
        means = [r.mean_length for r in rows]
        var = statistics.variance(means) if len(means) > 1 else 0.0
        sel = defaultdict(list)
        for r in rows:
            for k, v in r.selection_freq.items():
                sel[k].append(v)
        out.append(
            AggregateRecord(
                scenario,
                level,
                condition,
                statistics.fmean(means),
                var,
                len(rows),
                statistics.fmean(r.success_rate for r in rows),
                {k: statistics.fmean(v) for k, v in sorted(sel.items())},
            )
        )
    return out


def _relative_gain(baseline: float, value: float) -> float | None:
    if baseline == 0:
        return None
    return (baseline - value) / baseline


def improvement_summary(aggregates: Sequence[AggregateRecord]) -> dict:
    """Per scenario and level: IBL-manager gain over the worst solo agent and over random delegation."""
    by_key = {(a.scenario, a.level, a.condition): a for a in aggregates}
    summary = {}
    for scenario in sorted({a.scenario for a in aggregates}):
        levels = sorted({a.level for a in aggregates if a.scenario == scenario})
        per_level = []
        for level in levels:
            solos = [
                a.mean
                for (s, lv, c), a in by_key.items()
                if s == scenario and lv == level and c.startswith("solo-")
            ]
            ibl = by_key.get((scenario, level, IBL_MGR))
            rnd = by_key.get((scenario, level, RANDOM_MGR))
            if not solos or ibl is None or rnd is None:
                raise EmptyGroup(f"{scenario} level {level} lacks solo/random/ibl conditions")
            per_level.append(
                {
                    "level": level,
                    "worst_solo": max(solos),
                    "random_mgr": rnd.mean,
                    "ibl_mgr": ibl.mean,
                    "team_vs_solo": _relative_gain(max(solos), ibl.mean),
                    "manager_vs_random": _relative_gain(rnd.mean, ibl.mean),
                }
            )

        def best(name):
            vals = [row[name] for row in per_level if row[name] is not None]
            return max(vals) if vals else None

        summary[scenario] = {
            "levels": per_level,
            "max_team_vs_solo": best("team_vs_solo"),
            "max_manager_vs_random": best("manager_vs_random"),
        }
    return summary
