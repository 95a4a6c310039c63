import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibl_delegation.agents import NavAgent
from ibl_delegation.errors import InvariantViolation, KindMismatch, ParseError
from ibl_delegation.experiments import DIVERGENT, LevelRecord
from ibl_delegation.formats import (
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
    selection_columns,
    trace_text,
    write_results_csv,
)
from ibl_delegation.gridworld import E1, E2, EJ, GameAction, Position, add_error_states, generate_grid, parse_ascii
from ibl_delegation.ibl import IBLParams
from ibl_delegation.manager import ManagerAgent
from ibl_delegation.simulation import EpisodeConfig, EpisodeResult, TraceStep, train_manager, train_nav_agent


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), level=st.integers(0, 3))
def test_grid_round_trip(seed, level):
    g = add_error_states(generate_grid(6, 8, 0.4, seed=seed), level, [E1, E2, EJ], seed)
    assert load_grid(save_grid(g)) == g


def test_grid_document_shape():
    doc = json.loads(save_grid(parse_ascii("S#\n.G")))
    assert doc["format_version"] == 1
    assert doc["rows"] == 2 and doc["cols"] == 2


@pytest.mark.parametrize(
    "mutate, err",
    [
        (lambda d: d.pop("rows"), ParseError),
        (lambda d: d.update(format_version=99), ParseError),
        (lambda d: d.update(start=[0]), ParseError),
        (lambda d: d.update(goal=[0, 1]), InvariantViolation),
    ],
)
def test_bad_grid_documents(mutate, err):
    doc = json.loads(save_grid(parse_ascii("S#\n.G")))
    mutate(doc)
    with pytest.raises(err):
        load_grid(json.dumps(doc))


def test_garbage_is_a_parse_error():
    with pytest.raises(ParseError):
        load_grid("{not json")
    with pytest.raises(ParseError):
        load_grid("[1, 2]")


GRID = parse_ascii("S...\n.#..\n...G")


def test_q_policy_round_trip():
    agent = train_nav_agent(GRID, NavAgent.q_agent(1), 50, EpisodeConfig(30), rng=0)
    back = load_policy(save_policy(agent), expect="nav")
    assert back.snapshot() == agent.snapshot()


def test_ibl_policy_round_trip_preserves_behaviour():
    agent = train_nav_agent(GRID, NavAgent.ibl_agent(2, IBLParams(k=3)), 30, EpisodeConfig(30), rng=0)
    back = load_policy(save_policy(agent), expect="nav")
    assert back.snapshot() == agent.snapshot()
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    s = GRID.start
    now = agent.frozen_time()
    assert [agent.ibl.choose(s, list(GameAction), now, r1) for _ in range(20)] == [
        back.ibl.choose(s, list(GameAction), now, r2) for _ in range(20)
    ]


def test_manager_policy_round_trip():
    agents = [NavAgent.q_agent(1), NavAgent.q_agent(2)]
    mgr = train_manager(GRID, agents, ManagerAgent.ibl(2), 5, EpisodeConfig(20), rng=0)
    back = load_policy(save_policy(mgr), expect="manager")
    assert back.team_size == 2
    assert back.memory.snapshot() == mgr.memory.snapshot()
    assert load_policy(save_policy(ManagerAgent.random(3))).team_size == 3


def test_policy_kind_is_checked():
    text = save_policy(NavAgent.q_agent(1))
    with pytest.raises(KindMismatch):
        load_policy(text, expect="manager")


def test_overlong_recent_times_rejected():
    agent = NavAgent.ibl_agent(1, IBLParams(k=2))
    for t in range(1, 4):
        agent.ibl.tick()
        agent.ibl.record((Position(0, 0), GameAction.UP, 1.0), t)
    doc = json.loads(save_policy(agent))
    doc["memory"]["instances"][0]["recent_times"] = [1, 2, 3]
    with pytest.raises(ParseError):
        load_policy(json.dumps(doc))


def test_config_round_trip():
    cfg = RunConfig.from_profile("desk", workers=4, scenarios=(DIVERGENT,))
    back = load_config(save_config(cfg))
    assert back == cfg


def test_config_rejects_bad_values():
    doc = json.loads(save_config(RunConfig()))
    doc["sweep"]["level_counts"] = [3, 1]
    with pytest.raises(ParseError):
        load_config(json.dumps(doc))


def test_results_csv_round_trip(tmp_path):
    records = [
        LevelRecord(0, 1, "divergent-100-0", "ibl-mgr", 12.5, 3.25, 1.0, {("E1", 2): 0.9, ("E1", 1): 0.1}),
        LevelRecord(0, 1, "divergent-100-0", "solo-1", 150.0, 0.0, 0.0),
    ]
    path = write_results_csv(records, tmp_path / "r.csv", provenance(42, "desk"))
    back, prov = read_results_csv(path)
    assert prov["master_seed"] == "42" and prov["profile"] == "desk"
    assert sorted(back, key=lambda r: r.key) == sorted(records, key=lambda r: r.key)
    header = [l for l in path.read_text().splitlines() if not l.startswith("#")][0]
    assert header.endswith(",".join(selection_columns(2)))


def test_results_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ParseError):
        read_results_csv(p)


def test_trace_round_trip():
    steps = [
        TraceStep(1, Position(0, 0), 1, GameAction.RIGHT, False),
        TraceStep(2, Position(0, 1), 2, GameAction.DOWN, True),
        TraceStep(3, Position(1, 1), None, GameAction.RIGHT, False),
    ]
    grid, back = parse_trace(trace_text(GRID, EpisodeResult(False, 3, steps)))
    assert grid == GRID
    assert back == steps


def test_bad_trace_line():
    with pytest.raises(ParseError):
        parse_trace("1 0 0 1 SIDEWAYS 0\n")
    with pytest.raises(ParseError):
        parse_trace("1 0 0\n")
