"""Batch command line: ``ibl-delegation <command> [options]``.

Exit status is 0 on success, 1 on usage errors and 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .agents import AgentKind, NavAgent
from .charts import aggregates_csv_text, emit_charts
from .errors import DelegationError
from .experiments import PROFILES, aggregate_records, build_grid_suite, improvement_summary, run_sweep
from .formats import (
    RunConfig,
    load_config,
    load_grid,
    load_policy,
    parse_trace,
    provenance,
    read_results_csv,
    save_config,
    save_grid,
    save_policy,
    trace_text,
    write_results_csv,
)
from .gridworld import render_ascii, step
from .manager import ManagerAgent
from .simulation import EpisodeConfig, evaluate_solo, evaluate_team, train_manager, train_nav_agent

log = logging.getLogger("ibl_delegation")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="run-config JSON file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (unsigned 64-bit)")
    p.add_argument("--profile", choices=sorted(PROFILES), default=argparse.SUPPRESS)
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="ibl-delegation", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sub.add_parser("gen-grids", parents=[common], help="write the grid suite of a profile")

    p = sub.add_parser("train-nav", parents=[common], help="train one navigating agent")
    p.add_argument("--grid", type=Path, required=True)
    p.add_argument("--kind", choices=[k.value for k in AgentKind], required=True)
    p.add_argument("--id", type=int, default=1)
    p.add_argument("--episodes", type=int)
    p.add_argument("--output", type=Path)

    p = sub.add_parser("train-manager", parents=[common], help="train an IBL manager over frozen agents")
    p.add_argument("--grid", type=Path, required=True)
    p.add_argument("--agents", type=Path, nargs="+", required=True)
    p.add_argument("--error-probs", type=float, nargs="+", required=True)
    p.add_argument("--games", type=int)
    p.add_argument("--output", type=Path)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a solo agent or a managed team")
    p.add_argument("--grid", type=Path, required=True)
    p.add_argument("--agents", type=Path, nargs="+", required=True)
    p.add_argument("--error-probs", type=float, nargs="+", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--manager", type=Path, help="manager policy file")
    group.add_argument("--random-manager", action="store_true")
    group.add_argument("--solo", type=int, metavar="AGENT", help="1-based agent index to run alone")
    p.add_argument("--episodes", type=int)
    p.add_argument("--trace", type=Path, help="write the first episode as a step trace")

    sub.add_parser("sweep", parents=[common], help="run the full scenario sweep")

    p = sub.add_parser("report", parents=[common], help="aggregate a results CSV and draw charts")
    p.add_argument("--results", type=Path, required=True)

    p = sub.add_parser("replay", parents=[common], help="print a saved episode trace as ASCII frames")
    p.add_argument("trace", type=Path)
    p.add_argument("--grid", type=Path)
    p.add_argument("--delay", type=float, default=0.0, help="seconds between frames")
    return parser


def _run_config(args) -> RunConfig:
    if "config" in args:
        cfg = load_config(Path(args.config).read_text())
        if "profile" in args and args.profile != cfg.profile:
            cfg = replace(cfg, sweep=PROFILES[args.profile], profile=args.profile)
    else:
        cfg = RunConfig.from_profile(getattr(args, "profile", "desk"))
    if "seed" in args:
        if not 0 <= args.seed < 2**64:
            raise UsageError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg = replace(cfg, sweep=replace(cfg.sweep, master_seed=args.seed))
    if "workers" in args:
        if args.workers < 1:
            raise UsageError(f"--workers must be at least 1, got {args.workers}")
        cfg = replace(cfg, workers=args.workers)
    if "out" in args:
        cfg = replace(cfg, out_dir=str(args.out))
    return cfg


def _team(paths, probs):
    if len(paths) != len(probs):
        raise UsageError("--agents and --error-probs need the same number of values")
    team = []
    for i, (path, p) in enumerate(zip(paths, probs), start=1):
        agent = load_policy(Path(path).read_text(), expect="nav")
        team.append(agent.as_member(i, p))
    return team


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_gen_grids(args, cfg: RunConfig) -> None:
    out = Path(cfg.out_dir)
    for entry in build_grid_suite(cfg.sweep, max(s.size for s in cfg.scenarios)):
        _write(out / f"grid_{entry.grid_id:02d}_base.json", save_grid(entry.base))
        for level, grid in entry.variants.items():
            _write(out / f"grid_{entry.grid_id:02d}_level_{level:02d}.json", save_grid(grid))
        for w in entry.warnings:
            print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {cfg.sweep.grids} grid suites to {out}")


def cmd_train_nav(args, cfg: RunConfig) -> None:
    grid = load_grid(args.grid.read_text())
    if args.kind == "Q":
        agent = NavAgent.q_agent(args.id, replace(cfg.q))
    else:
        agent = NavAgent.ibl_agent(args.id, replace(cfg.ibl))
    episodes = cfg.sweep.nav_episodes if args.episodes is None else args.episodes
    train_nav_agent(grid, agent, episodes, EpisodeConfig(cfg.sweep.l_max), cfg.sweep.master_seed)
    output = args.output or Path(cfg.out_dir) / f"nav_{args.kind}_{args.id}.json"
    _write(output, save_policy(agent))
    print(f"trained {args.kind} agent for {episodes} episodes -> {output}")


def cmd_train_manager(args, cfg: RunConfig) -> None:
    grid = load_grid(args.grid.read_text())
    team = _team(args.agents, args.error_probs)
    mgr = ManagerAgent.ibl(len(team), replace(cfg.ibl))
    games = cfg.sweep.manager_games if args.games is None else args.games
    train_manager(grid, team, mgr, games, EpisodeConfig(cfg.sweep.l_max), cfg.sweep.master_seed)
    output = args.output or Path(cfg.out_dir) / "manager.json"
    _write(output, save_policy(mgr))
    print(f"trained manager for {games} games -> {output}")


def cmd_evaluate(args, cfg: RunConfig) -> None:
    grid = load_grid(args.grid.read_text())
    team = _team(args.agents, args.error_probs)
    episodes = cfg.sweep.eval_episodes if args.episodes is None else args.episodes
    episode = EpisodeConfig(cfg.sweep.l_max)
    rng = np.random.default_rng(cfg.sweep.master_seed)
    selections = {}
    if args.solo is not None:
        if not 1 <= args.solo <= len(team):
            raise UsageError(f"--solo must name an agent in 1..{len(team)}")
        results = evaluate_solo(grid, team[args.solo - 1], episodes, episode, rng)
    else:
        if args.random_manager:
            mgr = ManagerAgent.random(len(team))
        else:
            mgr = load_policy(args.manager.read_text(), expect="manager")
            if mgr.team_size != len(team):
                raise UsageError(f"manager expects {mgr.team_size} agents, got {len(team)}")
        results = evaluate_team(grid, team, mgr, episodes, episode, rng)
        selections = {f"{tag}/{agent}": v for (tag, agent), v in mgr.selection_frequencies().items()}
    lengths = np.array([r.length for r in results], dtype=float)
    report = {
        "episodes": episodes,
        "mean_length": float(lengths.mean()),
        "length_variance": float(lengths.var(ddof=1)) if lengths.size > 1 else 0.0,
        "success_rate": float(np.mean([r.success for r in results])),
        "selection_freq": selections,
        "master_seed": cfg.sweep.master_seed,
        "profile": cfg.profile,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.trace and results:
        _write(args.trace, trace_text(grid, results[0]))


def _report(records, prov: dict, out: Path) -> None:
    aggregates = aggregate_records(records)
    summary = improvement_summary(aggregates)
    _write(out / "aggregates.csv", aggregates_csv_text(aggregates, prov))
    _write(out / "summary.json", json.dumps({"provenance": prov, "scenarios": summary}, indent=2, sort_keys=True) + "\n")
    emit_charts(aggregates, summary, out / "charts", prov)


def cmd_sweep(args, cfg: RunConfig) -> None:
    out = Path(cfg.out_dir)
    prov = provenance(cfg.sweep.master_seed, cfg.profile)
    records = run_sweep(cfg.sweep, cfg.scenarios, cfg.ibl, cfg.q, workers=cfg.workers)
    team_size = max(s.size for s in cfg.scenarios)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "run_config.json", save_config(replace(cfg, workers=1, out_dir=".")))
    write_results_csv(records, out / "results.csv", prov, team_size)
    _report(records, prov, out)
    print(f"{len(records)} records -> {out / 'results.csv'}")


def cmd_report(args, cfg: RunConfig) -> None:
    records, prov = read_results_csv(args.results)
    out = Path(cfg.out_dir) if "out" in args else args.results.parent
    _report(records, prov, out)
    print(f"report written to {out}")


def cmd_replay(args, cfg: RunConfig) -> None:
    grid, steps = parse_trace(args.trace.read_text())
    if args.grid is not None:
        grid = load_grid(args.grid.read_text())
    if grid is None:
        raise UsageError("trace has no embedded grid; pass --grid")
    pos = steps[0].pos if steps else grid.start
    frames = [(None, pos)]
    for s in steps:
        pos = step(grid, s.pos, s.action).new_pos
        frames.append((s, pos))
    for i, (s, pos) in enumerate(frames):
        if s is None:
            header = f"frame 0: start at {tuple(pos)}"
        else:
            who = "-" if s.agent is None else f"agent {s.agent}"
            err = " (error)" if s.error_injected else ""
            header = f"frame {i}: t={s.tick} {who} {s.action.name}{err} -> {tuple(pos)}"
        print(header)
        print(render_ascii(grid, marker=pos))
        print()
        if args.delay:
            time.sleep(args.delay)


COMMANDS = {
    "gen-grids": cmd_gen_grids,
    "train-nav": cmd_train_nav,
    "train-manager": cmd_train_manager,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("ibl-delegation: error: a command is required")
        cfg = _run_config(args)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (DelegationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
