from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibl_delegation.errors import InsufficientOpenCells, InvariantViolation, UnreachableAfterRetries
from ibl_delegation.gridworld import (
    ACTIONS,
    E1,
    E2,
    EJ,
    ErrorTag,
    GameAction,
    GridSpec,
    Position,
    add_error_states,
    bfs_distances,
    error_types,
    generate_grid,
    parse_ascii,
    render_ascii,
    step,
)

TYPES = [E1, E2, EJ]


def brute_distance(grid, src):
    """Plain BFS from ``src`` to the goal, written independently of GridSpec.distances."""
    seen = {src: 0}
    q = deque([src])
    while q:
        r, c = q.popleft()
        if (r, c) == tuple(grid.goal):
            return seen[(r, c)]
        for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            n = (r + dr, c + dc)
            if 0 <= n[0] < grid.rows and 0 <= n[1] < grid.cols and n not in grid.walls and n not in seen:
                seen[n] = seen[(r, c)] + 1
                q.append(n)
    return None


def test_open_2x2_distance_is_manhattan():
    g = generate_grid(2, 2, 0.0, (0, 0), (1, 1), seed=3)
    assert not g.walls
    assert bfs_distances(g)[g.start] == 2


def test_generation_is_deterministic_in_seed():
    a = generate_grid(6, 8, 0.4, seed=11)
    b = generate_grid(6, 8, 0.4, seed=11)
    assert a == b
    assert a != generate_grid(6, 8, 0.4, seed=12)


def test_paper_geometry_reaches_goal():
    g = generate_grid(10, 15, 0.6, (0, 0), (9, 14), seed=7)
    assert brute_distance(g, g.start) is not None
    assert bfs_distances(g)[g.goal] == 0
    assert len(g.walls) == round(0.6 * 148)


def test_rejection_only_mode_reports_unreachable():
    with pytest.raises(UnreachableAfterRetries):
        generate_grid(10, 15, 0.6, seed=7, max_attempts=20, carve_fallback=False)


@pytest.mark.parametrize("bad", [dict(rows=1, cols=5), dict(wall_ratio=1.0), dict(start=(0, 0), goal=(0, 0))])
def test_generate_rejects_bad_arguments(bad):
    kwargs = dict(rows=4, cols=4, wall_ratio=0.2, seed=0) | bad
    with pytest.raises(ValueError):
        generate_grid(**kwargs)


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(2, 8),
    cols=st.integers(2, 8),
    ratio=st.floats(0.0, 0.5),
    seed=st.integers(0, 2**32),
)
def test_generated_grids_hold_invariants(rows, cols, ratio, seed):
    g = generate_grid(rows, cols, ratio, seed=seed)
    eligible = rows * cols - 2
    assert abs(len(g.walls) - ratio * eligible) <= 1
    assert g.start not in g.walls and g.goal not in g.walls
    assert brute_distance(g, g.start) == bfs_distances(g)[g.start]


def test_error_states_zero_count_is_identity():
    g = generate_grid(6, 8, 0.4, seed=1)
    assert add_error_states(g, 0, TYPES, seed=5) == g


def test_error_states_two_per_type():
    g = generate_grid(6, 8, 0.4, seed=1)
    h = add_error_states(g, 2, TYPES, seed=5)
    assert len(h.error_cells) == 6
    for tag in TYPES:
        assert sum(t == tag for t in h.error_cells.values()) == 2
    assert (h.walls, h.start, h.goal) == (g.walls, g.start, g.goal)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**63), k=st.integers(0, 6))
def test_error_placement_is_incremental(seed, k):
    g = generate_grid(6, 8, 0.3, seed=2)
    small = add_error_states(g, k, TYPES, seed)
    big = add_error_states(g, k + 1, TYPES, seed)
    assert small.error_cells.items() <= big.error_cells.items()
    for p in big.error_cells:
        assert p not in g.walls and p != g.start and p != g.goal


def test_error_placement_capacity():
    g = generate_grid(3, 3, 0.0, seed=0)  # 7 candidate cells
    add_error_states(g, 2, TYPES, seed=0)
    with pytest.raises(InsufficientOpenCells):
        add_error_states(g, 3, TYPES, seed=0)


def test_error_types_for_pairs_and_triples():
    assert error_types(2) == [E1, E2, EJ]
    assert len(error_types(3)) == 7


def test_error_tag_rejects_empty_and_zero():
    with pytest.raises(ValueError):
        ErrorTag(frozenset())
    with pytest.raises(ValueError):
        ErrorTag.of(0)


WALL_RIGHT = parse_ascii("S.#\n...\n..G")


def test_step_into_wall_collides():
    out = step(WALL_RIGHT, (0, 1), GameAction.RIGHT)
    assert out == ((0, 1), True, False)


def test_step_into_goal():
    out = step(WALL_RIGHT, (2, 1), GameAction.RIGHT)
    assert out == ((2, 2), False, True)


def test_boundary_is_a_wall():
    assert step(WALL_RIGHT, (0, 0), GameAction.UP) == ((0, 0), True, False)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 1000), actions=st.lists(st.sampled_from(ACTIONS), max_size=40))
def test_step_stays_on_open_cells(seed, actions):
    g = generate_grid(5, 5, 0.3, seed=seed)
    pos = g.start
    for a in actions:
        out = step(g, pos, a)
        assert g.is_open(out.new_pos)
        if out.collided:
            assert out.new_pos == pos
        assert out.reached_goal == (out.new_pos == g.goal)
        pos = out.new_pos


def test_corridor_distances():
    g = parse_ascii("S...G")
    d = bfs_distances(g)
    assert [d[(0, c)] for c in range(5)] == [4, 3, 2, 1, 0]


def test_enclosed_cell_is_unreachable():
    g = parse_ascii("S.#.\n..##\n...G")
    assert (0, 3) not in bfs_distances(g)


def test_center_wall_3x3():
    g = parse_ascii("S..\n.#.\n..G")
    assert bfs_distances(g)[(0, 0)] == 4
    assert brute_distance(g, (0, 0)) == 4


def test_render_small_corridor():
    assert render_ascii(parse_ascii("S.G")) == "S.G"


def test_render_parse_round_trip():
    g = add_error_states(generate_grid(6, 8, 0.4, seed=9), 2, TYPES, seed=4)
    back = parse_ascii(render_ascii(g), wall_ratio=g.wall_ratio, seed=g.seed)
    assert back == g


def test_render_uses_distinct_error_glyphs():
    g = GridSpec(3, 4, frozenset({Position(1, 1)}), (0, 0), (2, 3), {(0, 1): E1, (0, 2): E2, (1, 2): EJ})
    text = render_ascii(g)
    assert text.splitlines() == ["S12.", ".#J.", "...G"]


def test_gridspec_rejects_error_cell_on_wall():
    with pytest.raises(InvariantViolation):
        GridSpec(2, 3, frozenset({(0, 1)}), (0, 0), (1, 2), {(0, 1): E1})


def test_gridspec_rejects_disconnected_goal():
    with pytest.raises(InvariantViolation):
        parse_ascii("S#.\n##G")
