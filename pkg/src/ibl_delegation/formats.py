"""Text formats for grids, policies, run configs, results and episode traces.

Structured documents are JSON objects carrying a ``format_version`` field.
Results are CSV with ``#``-prefixed provenance lines above the header row.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .agents import AgentKind, NavAgent, QParams, QTable
from .errors import KindMismatch, ParseError
from .experiments import (
    PAPER_SCENARIOS,
    PROFILES,
    LevelRecord,
    ScenarioSpec,
    SweepConfig,
)
from .gridworld import ErrorTag, GameAction, GridSpec, Position, error_types
from .ibl import IBLMemory, IBLParams, InstanceKey, InstanceRecord
from .manager import PLAIN, ManagerAgent, ManagerKind
from .simulation import EpisodeResult, TraceStep

FORMAT_VERSION = 1


def _loads(text: str, what: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{what}: expected a JSON object at the top level")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(f"{what}: unsupported format_version {version!r}")
    return doc


def _need(doc: dict, name: str, what: str):
    if name not in doc:
        raise ParseError(f"{what}: missing field '{name}'")
    return doc[name]


def _pos(value, what: str) -> Position:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, int) for v in value)):
        raise ParseError(f"{what}: expected [row, col], got {value!r}")
    return Position(*value)


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


# grids ---------------------------------------------------------------------


def grid_to_dict(grid: GridSpec) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "rows": grid.rows,
        "cols": grid.cols,
        "start": list(grid.start),
        "goal": list(grid.goal),
        "walls": sorted([list(w) for w in grid.walls]),
        "error_cells": [
            {"pos": list(p), "agents": sorted(t.agents)} for p, t in sorted(grid.error_cells.items())
        ],
        "wall_ratio": grid.wall_ratio,
        "seed": grid.seed,
    }


def grid_from_dict(doc: dict) -> GridSpec:
    what = "grid"
    try:
        cells = {}
        for i, entry in enumerate(_need(doc, "error_cells", what)):
            pos = _pos(_need(entry, "pos", f"{what}.error_cells[{i}]"), f"{what}.error_cells[{i}].pos")
            agents = _need(entry, "agents", f"{what}.error_cells[{i}]")
            try:
                cells[pos] = ErrorTag(frozenset(agents))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{what}.error_cells[{i}].agents: {exc}") from exc
        walls = [_pos(w, f"{what}.walls[{i}]") for i, w in enumerate(_need(doc, "walls", what))]
        rows, cols = int(_need(doc, "rows", what)), int(_need(doc, "cols", what))
        start = _pos(_need(doc, "start", what), f"{what}.start")
        goal = _pos(_need(doc, "goal", what), f"{what}.goal")
        wall_ratio = float(_need(doc, "wall_ratio", what))
        seed = int(_need(doc, "seed", what))
    except (TypeError, AttributeError) as exc:
        raise ParseError(f"{what}: malformed document ({exc})") from exc
    return GridSpec(rows, cols, frozenset(walls), start, goal, cells, wall_ratio, seed)


def save_grid(grid: GridSpec) -> str:
    return _dumps(grid_to_dict(grid))


def load_grid(text: str) -> GridSpec:
    return grid_from_dict(_loads(text, "grid"))


# policies ------------------------------------------------------------------


def _memory_to_dict(memory: IBLMemory) -> dict:
    return {
        "params": asdict(memory.params),
        "clock": memory.clock,
        "instances": [
            {
                "state": list(rec.key.state),
                "action": int(rec.key.action),
                "outcome": rec.key.outcome,
                "first_time": rec.first_time,
                "recent_times": list(rec.recent_times),
                "total_count": rec.total_count,
            }
            for rec in memory.instances.values()
        ],
    }


def _memory_from_dict(doc: dict, action_type, what: str) -> IBLMemory:
    try:
        params = IBLParams(**_need(doc, "params", what))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}.params: {exc}") from exc
    memory = IBLMemory(params, int(_need(doc, "clock", what)))
    for i, entry in enumerate(_need(doc, "instances", what)):
        where = f"{what}.instances[{i}]"
        recent = list(_need(entry, "recent_times", where))
        count = int(_need(entry, "total_count", where))
        first = int(_need(entry, "first_time", where))
        if not 1 <= len(recent) <= params.k:
            raise ParseError(f"{where}.recent_times: length {len(recent)} outside 1..k={params.k}")
        if count < len(recent) or first > min(recent) or recent != sorted(recent):
            raise ParseError(f"{where}: inconsistent first_time/recent_times/total_count")
        if count == len(recent) and first != recent[0]:
            raise ParseError(f"{where}: first_time must equal the oldest time when nothing was evicted")
        if max(recent) > memory.clock:
            raise ParseError(f"{where}: observation after the memory clock")
        key = InstanceKey(
            _pos(_need(entry, "state", where), f"{where}.state"),
            action_type(_need(entry, "action", where)),
            float(_need(entry, "outcome", where)),
        )
        try:
            memory.add_record(InstanceRecord(key, first, recent, count))
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}") from exc
    return memory


def policy_to_dict(policy) -> dict:
    doc = {"format_version": FORMAT_VERSION}
    if isinstance(policy, NavAgent):
        doc.update(kind=f"nav-{policy.kind.value}", id=policy.id, error_prob=policy.error_prob)
        if policy.kind is AgentKind.Q:
            doc["q_params"] = asdict(policy.q_params)
            doc["q_table"] = [
                {"row": pos.row, "col": pos.col, "action": int(a), "value": v}
                for (pos, a), v in sorted(policy.q.entries().items())
            ]
        else:
            doc["memory"] = _memory_to_dict(policy.ibl)
    elif isinstance(policy, ManagerAgent):
        doc.update(kind=f"manager-{policy.kind.value}", team_size=policy.team_size)
        if policy.memory is not None:
            doc["memory"] = _memory_to_dict(policy.memory)
    else:
        raise TypeError(f"cannot serialize {type(policy).__name__}")
    return doc


POLICY_KINDS = ("nav-Q", "nav-IBL", "manager-IBL", "manager-Random")


def policy_from_dict(doc: dict, expect: str | None = None):
    what = "policy"
    kind = _need(doc, "kind", what)
    if kind not in POLICY_KINDS:
        raise ParseError(f"{what}.kind: unknown kind {kind!r}")
    if expect is not None and not kind.startswith(expect):
        raise KindMismatch(f"expected a {expect} policy, found {kind}")
    try:
        if kind == "nav-Q":
            params = QParams(**_need(doc, "q_params", what))
            table = QTable()
            for i, e in enumerate(_need(doc, "q_table", what)):
                where = f"{what}.q_table[{i}]"
                pos = Position(int(_need(e, "row", where)), int(_need(e, "col", where)))
                table.set(pos, GameAction(int(_need(e, "action", where))), float(_need(e, "value", where)))
            return NavAgent(int(doc.get("id", 1)), AgentKind.Q, table, params, None, float(doc.get("error_prob", 0.0)))
        if kind == "nav-IBL":
            memory = _memory_from_dict(_need(doc, "memory", what), GameAction, f"{what}.memory")
            return NavAgent(int(doc.get("id", 1)), AgentKind.IBL, None, None, memory, float(doc.get("error_prob", 0.0)))
        team_size = int(_need(doc, "team_size", what))
        if kind == "manager-Random":
            return ManagerAgent.random(team_size)
        memory = _memory_from_dict(_need(doc, "memory", what), int, f"{what}.memory")
        return ManagerAgent(ManagerKind.IBL, team_size, memory)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{what}: {exc}") from exc


def save_policy(policy) -> str:
    return _dumps(policy_to_dict(policy))


def load_policy(text: str, expect: str | None = None):
    """Load a navigating agent or manager; ``expect`` is ``"nav"`` or ``"manager"``."""
    return policy_from_dict(_loads(text, "policy"), expect)


# run configuration ---------------------------------------------------------


@dataclass
class RunConfig:
    sweep: SweepConfig = field(default_factory=SweepConfig)
    ibl: IBLParams = field(default_factory=IBLParams)
    q: QParams = field(default_factory=QParams)
    scenarios: tuple = PAPER_SCENARIOS
    out_dir: str = "results"
    workers: int = 1
    profile: str = "desk"

    @classmethod
    def from_profile(cls, profile: str, **overrides) -> "RunConfig":
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        return cls(sweep=PROFILES[profile], profile=profile, **overrides)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "profile": self.profile,
            "sweep": asdict(self.sweep),
            "ibl": asdict(self.ibl),
            "q": asdict(self.q),
            "scenarios": [
                {"label": s.label, "team": [{"kind": k.value, "error_prob": p} for k, p in s.team]}
                for s in self.scenarios
            ],
            "out_dir": self.out_dir,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        profile = doc.get("profile", "desk")
        if profile not in PROFILES:
            raise ParseError(f"config.profile: unknown profile {profile!r}")
        try:
            base = asdict(PROFILES[profile])
            base.update(doc.get("sweep", {}))
            base["level_counts"] = tuple(base["level_counts"])
            sweep = SweepConfig(**base)
            ibl = IBLParams(**doc.get("ibl", {}))
            q = QParams(**doc.get("q", {}))
            scenarios = tuple(
                ScenarioSpec(tuple((m["kind"], m["error_prob"]) for m in s["team"]), s["label"])
                for s in doc["scenarios"]
            ) if "scenarios" in doc else PAPER_SCENARIOS
        except (TypeError, ValueError, KeyError) as exc:
            raise ParseError(f"config: {exc!r}") from exc
        return cls(sweep, ibl, q, scenarios, doc.get("out_dir", "results"), int(doc.get("workers", 1)), profile)


def save_config(cfg: RunConfig) -> str:
    return _dumps(cfg.to_dict())


def load_config(text: str) -> RunConfig:
    return RunConfig.from_dict(_loads(text, "config"))


# results -------------------------------------------------------------------

BASE_COLUMNS = [
    "grid_id",
    "level",
    "scenario",
    "condition",
    "mean_length",
    "length_variance",
    "success_rate",
]


def selection_columns(team_size: int = 2) -> list[str]:
    tags = [PLAIN] + [t.label for t in error_types(team_size)]
    return [f"sel_{tag}_a{agent}" for tag in tags for agent in range(1, team_size + 1)]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def results_csv_text(records: Sequence[LevelRecord], provenance: dict, team_size: int = 2) -> str:
    buf = io.StringIO()
    for k in sorted(provenance):
        buf.write(f"# {k}={provenance[k]}\n")
    sel_cols = selection_columns(team_size)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BASE_COLUMNS + sel_cols)
    for r in sorted(records, key=lambda r: r.key):
        freq = {f"sel_{tag}_a{agent}": v for (tag, agent), v in r.selection_freq.items()}
        writer.writerow(
            [r.grid_id, r.level, r.scenario, r.condition, _fmt(r.mean_length),
             _fmt(r.length_variance), _fmt(r.success_rate)]
            + [_fmt(freq[c]) if c in freq else "" for c in sel_cols]
        )
    return buf.getvalue()


def provenance(master_seed: int, profile: str) -> dict:
    return {
        "artifact_version": __version__,
        "format_version": FORMAT_VERSION,
        "master_seed": master_seed,
        "profile": profile,
    }


def write_results_csv(records, path, provenance: dict, team_size: int = 2) -> Path:
    path = Path(path)
    path.write_text(results_csv_text(records, provenance, team_size))
    return path


def read_results_csv(path) -> tuple[list[LevelRecord], dict]:
    text = Path(path).read_text()
    prov, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            prov[k] = v
        else:
            body.append(line)
    reader = csv.DictReader(body)
    if reader.fieldnames is None or reader.fieldnames[: len(BASE_COLUMNS)] != BASE_COLUMNS:
        raise ParseError(f"{path}: unexpected header {reader.fieldnames}")
    records = []
    for i, row in enumerate(reader, start=2):
        try:
            freq = {}
            for col, v in row.items():
                if col.startswith("sel_") and v:
                    tag, agent = col[4:].rsplit("_a", 1)
                    freq[(tag, int(agent))] = float(v)
            records.append(
                LevelRecord(
                    int(row["grid_id"]), int(row["level"]), row["scenario"], row["condition"],
                    float(row["mean_length"]), float(row["length_variance"]),
                    float(row["success_rate"]), freq,
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: data row {i}: {exc}") from exc
    return records, prov


# episode traces ------------------------------------------------------------


def trace_text(grid: GridSpec, result: EpisodeResult) -> str:
    """Line per step: ``tick row col agent action error_injected``."""
    lines = [
        f"# format_version={FORMAT_VERSION}",
        "# grid=" + json.dumps(grid_to_dict(grid), separators=(",", ":")),
        "# tick row col agent action error_injected",
    ]
    for s in result.trajectory:
        agent = "-" if s.agent is None else str(s.agent)
        lines.append(
            f"{s.tick} {s.pos.row} {s.pos.col} {agent} {GameAction(s.action).name} {int(s.error_injected)}"
        )
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> tuple[GridSpec | None, list[TraceStep]]:
    grid, steps = None, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# grid="):
                grid = grid_from_dict(_loads(line[len("# grid="):], "trace grid"))
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"trace line {lineno}: expected 6 fields, got {len(parts)}")
        try:
            tick, row, col = int(parts[0]), int(parts[1]), int(parts[2])
            agent = None if parts[3] == "-" else int(parts[3])
            action = GameAction[parts[4]]
            injected = bool(int(parts[5]))
        except (ValueError, KeyError) as exc:
            raise ParseError(f"trace line {lineno}: {exc}") from exc
        steps.append(TraceStep(tick, Position(row, col), agent, action, injected))
    return grid, steps
