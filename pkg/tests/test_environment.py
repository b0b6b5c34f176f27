"""World generation, room queries, matrix export, pathfinding.

The pathfinding oracle here is a plain textbook breadth-first search written
independently of the engine's A* so the two can disagree.
"""

import json
from collections import deque

import pytest

from teamsim import environment as envmod
from teamsim.environment import (
    EntitySpec,
    Environment,
    adjacent_rooms,
    generate_environment,
    region_routes,
    room_of,
    shortest_path,
    to_matrix,
)
from teamsim.errors import (
    BlockedEndpoint,
    DimensionTooSmall,
    EntityOutOfBounds,
    OccupantOnBlockedCell,
    OutOfBounds,
    UnknownRegion,
    UnplaceableEntity,
)


# --- oracles -------------------------------------------------------------


def bfs_distance(env, start, goal):
    """Independent shortest-distance oracle (queue-based BFS)."""
    if start == goal:
        return 0
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        (x, y), dist = queue.popleft()
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nxt == goal:
                return dist + 1
            if env.is_free(nxt) and nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, dist + 1))
    return None


def flood_fill(env, start):
    seen = {start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if env.is_free(nxt) and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


# --- generation ----------------------------------------------------------


def test_minimal_grid_is_single_free_leaf():
    env = generate_environment(3, 8, 8, "low")
    assert env.leaf_ids() == [0]
    for y in range(1, 7):
        for x in range(1, 7):
            assert env.is_free((x, y))
    assert env.doors == {}


def test_dimension_too_small():
    with pytest.raises(DimensionTooSmall):
        generate_environment(0, 7, 20, "low")


def test_boundary_ring_blocked():
    env = generate_environment(1, 12, 9, "low")
    for x in range(12):
        assert not env.is_free((x, 0))
        assert not env.is_free((x, 8))
    for y in range(9):
        assert not env.is_free((0, y))
        assert not env.is_free((11, y))


def test_determinism_byte_identical():
    a = generate_environment(7, 40, 40, "medium")
    b = generate_environment(7, 40, 40, "medium")
    assert json.dumps(a.to_dict(), sort_keys=True) == \
        json.dumps(b.to_dict(), sort_keys=True)


def test_different_seeds_differ():
    a = generate_environment(1, 30, 30, "low")
    b = generate_environment(2, 30, 30, "low")
    assert a.to_dict() != b.to_dict()


def test_target_room_counts():
    assert len(generate_environment(5, 30, 30, "low").leaves) == 6
    assert len(generate_environment(5, 40, 40, "medium").leaves) == 10
    assert len(generate_environment(5, 50, 50, "high").leaves) == 16


def test_rescue_environment_has_35_victims_and_connected_rooms():
    specs = [
        EntitySpec(name="Victim", count=35, avoid_regions=("hospital",)),
        EntitySpec(name="Hospital Sign", kind="non_interactive", count=1,
                   region="hospital"),
    ]
    env = generate_environment(7, 30, 30, "low", specs, tags=("hospital",))
    victims = [e for e in env.entities.values() if e.name == "Victim"]
    assert len(victims) == 35
    hospital = env.region_tagged("hospital")
    assert hospital == 0
    for victim in victims:
        assert room_of(env, victim.cell) != hospital
    # Every leaf pair mutually reachable: one flood fill covers all free cells.
    free = env.free_cells()
    assert flood_fill(env, free[0]) == set(free)


def test_tiling_exact():
    for seed in range(10):
        env = generate_environment(seed, 30, 30, "low")
        covered = []
        for leaf in env.leaves.values():
            rx, ry, rw, rh = leaf.rect
            covered.extend((x, y) for x in range(rx, rx + rw)
                           for y in range(ry, ry + rh))
        interior = [(x, y) for x in range(1, 29) for y in range(1, 29)]
        assert sorted(covered) == interior
        assert len(covered) == len(set(covered))


def test_internal_nodes_union_of_children():
    env = generate_environment(11, 40, 40, "medium")

    def walk(node):
        if node.is_leaf:
            return
        rx, ry, rw, rh = node.rect
        cells = {(x, y) for x in range(rx, rx + rw) for y in range(ry, ry + rh)}
        child_cells = set()
        for child in (node.left, node.right):
            cx, cy, cw, ch = child.rect
            child_cells |= {(x, y) for x in range(cx, cx + cw)
                            for y in range(cy, cy + ch)}
        assert cells == child_cells
        walk(node.left)
        walk(node.right)

    walk(env.tree)


def test_entity_out_of_bounds():
    with pytest.raises(EntityOutOfBounds):
        generate_environment(1, 20, 20, "low",
                             [EntitySpec(name="Crate", locations=[(25, 3)])])


def test_entity_on_wall_unplaceable():
    with pytest.raises(UnplaceableEntity):
        generate_environment(1, 20, 20, "low",
                             [EntitySpec(name="Crate", locations=[(0, 0)])])


def test_entity_overflow_unplaceable():
    with pytest.raises(UnplaceableEntity):
        generate_environment(1, 8, 8, "low",
                             [EntitySpec(name="Crate", count=10_000)])


def test_rubble_lands_on_doors():
    env = generate_environment(9, 30, 30, "low",
                               [EntitySpec(name="Rubble", count=2, on_door=True,
                                           attributes={"blocks_door": "true"})])
    rubble = [e for e in env.entities.values() if e.name == "Rubble"]
    assert len(rubble) == 2
    for pile in rubble:
        assert pile.cell in env.doors


def test_environment_roundtrip():
    env = generate_environment(4, 30, 30, "low",
                               [EntitySpec(name="Victim", count=5)])
    restored = Environment.from_dict(json.loads(json.dumps(env.to_dict())))
    assert restored.to_dict() == env.to_dict()
    assert restored.adjacency == env.adjacency


# --- matrix --------------------------------------------------------------


def test_matrix_empty_env():
    env = generate_environment(1, 8, 8, "low")
    matrix = to_matrix(env, {})
    assert matrix.values[0] == [0] * 8
    assert matrix.values[7] == [0] * 8
    for row in matrix.values[1:7]:
        assert row[0] == 0 and row[7] == 0
        assert row[1:7] == [1] * 6


def test_matrix_shows_agent_id():
    env = generate_environment(1, 8, 8, "low")
    matrix = to_matrix(env, {4: (2, 3)})
    assert matrix.values[3][2] == 4


def test_matrix_occupant_on_wall_rejected():
    env = generate_environment(1, 8, 8, "low")
    with pytest.raises(OccupantOnBlockedCell):
        to_matrix(env, {2: (0, 0)})


def test_matrix_terrain_consistency():
    env = generate_environment(13, 40, 40, "medium")
    matrix = to_matrix(env, {})
    for y in range(env.height):
        for x in range(env.width):
            assert (matrix.values[y][x] == 0) == (not env.is_free((x, y)))


# --- room queries ----------------------------------------------------------


def test_room_of_containment():
    env = generate_environment(2, 30, 30, "low")
    for rid, leaf in env.leaves.items():
        fx, fy, fw, fh = leaf.free_rect
        assert room_of(env, (fx, fy)) == rid
        assert room_of(env, (fx + fw - 1, fy + fh - 1)) == rid


def test_room_of_boundary_rejected():
    env = generate_environment(2, 30, 30, "low")
    with pytest.raises(OutOfBounds):
        room_of(env, (0, 5))
    with pytest.raises(OutOfBounds):
        room_of(env, (40, 40))


def test_room_of_door_tiebreak():
    env = generate_environment(2, 30, 30, "low")
    assert env.doors
    for door, (a, b) in env.doors.items():
        assert a < b
        assert room_of(env, door) == a


def test_adjacent_rooms_sorted_and_symmetric():
    for seed in range(20):
        env = generate_environment(seed, 30, 30, "low")
        for rid in env.leaf_ids():
            neighbors = adjacent_rooms(env, rid)
            assert neighbors == sorted(neighbors)
            for other in neighbors:
                assert rid in adjacent_rooms(env, other)


def test_adjacent_rooms_unknown_region():
    env = generate_environment(2, 30, 30, "low")
    with pytest.raises(UnknownRegion):
        adjacent_rooms(env, 999)
    internal_id = len(env.leaves)  # internal node ids start after leaves
    with pytest.raises(UnknownRegion):
        adjacent_rooms(env, internal_id)


def test_region_routes_hops_and_blocking():
    env = generate_environment(3, 30, 30, "low")
    routes = region_routes(env, 0)
    assert set(routes) == set(env.leaf_ids()) - {0}
    for neighbor in adjacent_rooms(env, 0):
        assert routes[neighbor]["hops"] == 1
    # Blocking every door out of region 0 removes all routes.
    blocked = {door for _, door in env.adjacency[0]}
    assert region_routes(env, 0, blocked_doors=blocked) == {}


# --- pathfinding -----------------------------------------------------------


def test_shortest_path_identity():
    env = generate_environment(5, 30, 30, "low")
    cell = env.region_free_cells(0)[0]
    assert shortest_path(env, cell, cell) == [cell]


def test_shortest_path_blocked_endpoint():
    env = generate_environment(5, 30, 30, "low")
    cell = env.region_free_cells(0)[0]
    with pytest.raises(BlockedEndpoint):
        shortest_path(env, cell, (0, 0))


def test_shortest_path_matches_bfs_oracle():
    import random

    rng = random.Random(99)
    for seed in range(5):
        env = generate_environment(seed, 30, 30, "low")
        free = env.free_cells()
        for _ in range(50):
            start, goal = rng.choice(free), rng.choice(free)
            path = shortest_path(env, start, goal)
            assert path[0] == start and path[-1] == goal
            assert len(path) - 1 == bfs_distance(env, start, goal)
            for a, b in zip(path, path[1:]):
                assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
                assert env.is_free(b)


def test_shortest_path_respects_extra_blocked():
    env = generate_environment(3, 30, 30, "low")
    # Cut every door around region 0: no path can leave the room.
    doors = {door for _, door in env.adjacency[0]}
    inside = env.region_free_cells(0)[0]
    outside = env.region_free_cells(adjacent_rooms(env, 0)[0])[0]
    with pytest.raises(envmod.NoPath):
        shortest_path(env, inside, outside, extra_blocked=doors)
