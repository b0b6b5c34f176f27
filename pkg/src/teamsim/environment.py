"""Procedural 2D environments: grid, rooms, doors, entities, pathfinding.

The world is a rectangular cell grid with a blocked boundary ring.  The
interior is recursively partitioned into rooms by axis-alternating binary
splits; every split line becomes a one-cell-thick wall with exactly one door
carved through it, which guarantees that the room graph is a tree and hence
connected.  Environments are immutable after generation: agent occupancy and
entity state live in the engine's simulation state and are only overlaid
here (``to_matrix``).

Geometry convention: cells are addressed ``(x, y)`` with ``x`` the column and
``y`` the row; exported matrices are row-major (``values[y][x]``).  Movement
is 4-connected; diagonal steps do not exist.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import (
    BlockedEndpoint,
    DimensionTooSmall,
    EntityOutOfBounds,
    NoPath,
    OccupantOnBlockedCell,
    OutOfBounds,
    UnknownRegion,
    UnplaceableEntity,
)

BLOCKED = 0
FREE = 1

# A room side (of free cells) never drops below this; a region whose free
# extent cannot fit two such rooms plus a wall is a leaf.
MIN_ROOM_SIDE = 6

TARGET_LEAVES = {"low": 6, "medium": 10, "high": 16}

Coord = tuple[int, int]

# Fixed neighbor order keeps path tie-breaks replayable.
NEIGHBOR_STEPS: tuple[Coord, ...] = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass
class Cell:
    """One grid cell as seen by state views and logs."""

    terrain: int  # BLOCKED or FREE
    occupant: Optional[int] = None
    entity_refs: list[str] = field(default_factory=list)


@dataclass
class RegionNode:
    """A node of the partition tree.

    ``rect`` tiles the parent exactly (wall strips included on the west/north
    edges where the node was carved off); ``free_rect`` is the solid free
    rectangle inside it.  Leaves are rooms.
    """

    id: int
    rect: tuple[int, int, int, int]
    free_rect: tuple[int, int, int, int]
    depth: int
    name: str = ""
    description: str = ""
    left: Optional["RegionNode"] = None
    right: Optional["RegionNode"] = None
    door: Optional[Coord] = None  # door carved in this node's splitting wall

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "rect": list(self.rect),
            "free_rect": list(self.free_rect),
            "depth": self.depth,
            "name": self.name,
            "description": self.description,
        }
        if not self.is_leaf:
            d["door"] = list(self.door) if self.door else None
            d["left"] = self.left.to_dict()
            d["right"] = self.right.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "RegionNode":
        node = RegionNode(
            id=d["id"],
            rect=tuple(d["rect"]),
            free_rect=tuple(d["free_rect"]),
            depth=d["depth"],
            name=d["name"],
            description=d["description"],
        )
        if "left" in d:
            node.door = tuple(d["door"]) if d.get("door") else None
            node.left = RegionNode.from_dict(d["left"])
            node.right = RegionNode.from_dict(d["right"])
        return node


@dataclass
class Entity:
    """A placed world object.

    ``location`` is either a cell coordinate or ``("carried", agent_id)``.
    Non-interactive entities never change location or state after placement.
    """

    id: str
    name: str
    kind: str  # "interactive" | "non_interactive"
    location: tuple
    state: dict[str, str] = field(default_factory=dict)

    @property
    def carried_by(self) -> Optional[int]:
        if self.location and self.location[0] == "carried":
            return self.location[1]
        return None

    @property
    def cell(self) -> Optional[Coord]:
        if self.carried_by is None:
            return (self.location[0], self.location[1])
        return None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind,
            "location": list(self.location),
            "state": dict(sorted(self.state.items())),
        }

    @staticmethod
    def from_dict(d: dict) -> "Entity":
        loc = d["location"]
        location = ("carried", loc[1]) if loc and loc[0] == "carried" else (loc[0], loc[1])
        return Entity(d["id"], d["name"], d["kind"], location, dict(d["state"]))


@dataclass
class EntitySpec:
    """Declarative request for entities to place at generation time."""

    name: str
    kind: str = "interactive"
    count: int = 1
    locations: Optional[list[Coord]] = None  # explicit cells, honored first
    region: Optional[str] = None  # place inside this tagged region
    avoid_regions: tuple[str, ...] = ()  # tags excluded from random placement
    on_door: bool = False  # place on door cells (e.g. rubble)
    attributes: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def from_dict(d: dict) -> "EntitySpec":
        return EntitySpec(
            name=d["name"],
            kind=d.get("kind", "interactive"),
            count=int(d.get("count", 1)),
            locations=[tuple(c) for c in d["locations"]] if d.get("locations") else None,
            region=d.get("region"),
            avoid_regions=tuple(d.get("avoid_regions", ())),
            on_door=bool(d.get("on_door", False)),
            attributes=dict(d.get("attributes", {})),
        )

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "kind": self.kind, "count": self.count}
        if self.locations:
            d["locations"] = [list(c) for c in self.locations]
        if self.region:
            d["region"] = self.region
        if self.avoid_regions:
            d["avoid_regions"] = list(self.avoid_regions)
        if self.on_door:
            d["on_door"] = True
        if self.attributes:
            d["attributes"] = dict(sorted(self.attributes.items()))
        return d


@dataclass
class TraversabilityMatrix:
    """Row-major grid export: 0 blocked, 1 free, agent id (>= 2) occupied."""

    width: int
    height: int
    values: list[list[int]]

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height, "values": self.values}


class Environment:
    """Immutable generated world: terrain, partition tree, room graph, entities."""

    def __init__(
        self,
        width: int,
        height: int,
        terrain: list[int],
        tree: RegionNode,
        doors: dict[Coord, tuple[int, int]],
        entities: dict[str, Entity],
        tags: dict[str, int],
        seed: int,
        complexity: str,
    ):
        self.width = width
        self.height = height
        self.terrain = terrain  # row-major, BLOCKED/FREE
        self.tree = tree
        self.doors = doors  # door cell -> (leaf_a, leaf_b) with a < b
        self.entities = entities  # initial placement; engine copies to state
        self.tags = tags  # lowercase tag -> leaf id
        self.seed = seed
        self.complexity = complexity

        self.leaves: dict[int, RegionNode] = {}
        internal = []
        stack = [tree]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                self.leaves[node.id] = node
            else:
                internal.append(node)
                stack.extend((node.right, node.left))
        self._internal_ids = {n.id for n in internal}

        # Room adjacency from doors: leaf id -> sorted [(neighbor, door cell)]
        adj: dict[int, list[tuple[int, Coord]]] = {lid: [] for lid in self.leaves}
        for cell, (a, b) in doors.items():
            adj[a].append((b, cell))
            adj[b].append((a, cell))
        self.adjacency = {lid: sorted(v) for lid, v in adj.items()}

    # --- cell helpers ---

    def in_bounds(self, cell: Coord) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_boundary(self, cell: Coord) -> bool:
        x, y = cell
        return x == 0 or y == 0 or x == self.width - 1 or y == self.height - 1

    def terrain_at(self, cell: Coord) -> int:
        return self.terrain[cell[1] * self.width + cell[0]]

    def is_free(self, cell: Coord) -> bool:
        return self.in_bounds(cell) and self.terrain_at(cell) == FREE

    def free_cells(self) -> list[Coord]:
        return [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if self.terrain[y * self.width + x] == FREE
        ]

    def region_free_cells(self, region_id: int) -> list[Coord]:
        """Free cells of a room, row-major, doors excluded."""
        leaf = self.leaves.get(region_id)
        if leaf is None:
            raise UnknownRegion(f"region {region_id} is not a room")
        fx, fy, fw, fh = leaf.free_rect
        return [
            (x, y)
            for y in range(fy, fy + fh)
            for x in range(fx, fx + fw)
            if self.is_free((x, y)) and (x, y) not in self.doors
        ]

    def leaf_ids(self) -> list[int]:
        return sorted(self.leaves)

    def region_tagged(self, tag: str) -> Optional[int]:
        return self.tags.get(tag.lower())

    # --- serialization ---

    def to_dict(self) -> dict:
        return {
            "schema": "environment@1",
            "width": self.width,
            "height": self.height,
            "seed": self.seed,
            "complexity": self.complexity,
            "terrain": list(self.terrain),
            "tree": self.tree.to_dict(),
            "doors": [[list(c), list(pair)] for c, pair in sorted(self.doors.items())],
            "entities": [self.entities[k].to_dict() for k in sorted(self.entities)],
            "tags": dict(sorted(self.tags.items())),
        }

    @staticmethod
    def from_dict(d: dict) -> "Environment":
        if d.get("schema") != "environment@1":
            raise ValueError(f"unsupported environment schema: {d.get('schema')!r}")
        return Environment(
            width=d["width"],
            height=d["height"],
            terrain=list(d["terrain"]),
            tree=RegionNode.from_dict(d["tree"]),
            doors={tuple(c): tuple(pair) for c, pair in d["doors"]},
            entities={e["id"]: Entity.from_dict(e) for e in d["entities"]},
            tags={k: v for k, v in d["tags"].items()},
            seed=d["seed"],
            complexity=d["complexity"],
        )


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


class _Node:
    """Mutable node used while partitioning; frozen into RegionNode after."""

    __slots__ = ("rect", "free_rect", "depth", "order", "left", "right", "wall")

    def __init__(self, rect, free_rect, depth, order):
        self.rect = rect
        self.free_rect = free_rect
        self.depth = depth
        self.order = order
        self.left = None
        self.right = None
        self.wall = None  # ("x"|"y", position, span_lo, span_hi)


def _split_axis_options(node: _Node) -> list[str]:
    fx, fy, fw, fh = node.free_rect
    opts = []
    preferred = "x" if node.depth % 2 == 0 else "y"
    other = "y" if preferred == "x" else "x"
    if (fw if preferred == "x" else fh) >= 2 * MIN_ROOM_SIDE + 1:
        opts.append(preferred)
    if (fw if other == "x" else fh) >= 2 * MIN_ROOM_SIDE + 1:
        opts.append(other)
    return opts


def _split(node: _Node, axis: str, rng: random.Random, order: int) -> tuple[_Node, _Node]:
    rx, ry, rw, rh = node.rect
    fx, fy, fw, fh = node.free_rect
    if axis == "x":
        extent = fw
    else:
        extent = fh
    # Split offset drawn from the middle 50% of the free extent, clamped so
    # both child rooms keep at least MIN_ROOM_SIDE free cells.
    lo = max(MIN_ROOM_SIDE, math.ceil(extent * 0.25))
    hi = min(extent - MIN_ROOM_SIDE - 1, math.floor(extent * 0.75))
    k = rng.randint(lo, hi)
    if axis == "x":
        wall_x = fx + k
        left = _Node((rx, ry, wall_x - rx, rh), (fx, fy, k, fh), node.depth + 1, order)
        right = _Node(
            (wall_x, ry, rx + rw - wall_x, rh),
            (wall_x + 1, fy, fw - k - 1, fh),
            node.depth + 1,
            order + 1,
        )
        node.wall = ("x", wall_x, fy, fy + fh - 1)
    else:
        wall_y = fy + k
        left = _Node((rx, ry, rw, wall_y - ry), (fx, fy, fw, k), node.depth + 1, order)
        right = _Node(
            (rx, wall_y, rw, ry + rh - wall_y),
            (fx, wall_y + 1, fw, fh - k - 1),
            node.depth + 1,
            order + 1,
        )
        node.wall = ("y", wall_y, fx, fx + fw - 1)
    node.left, node.right = left, right
    return left, right


def generate_environment(
    seed: int,
    width: int,
    height: int,
    complexity: str = "low",
    entity_specs: Sequence[EntitySpec | dict] = (),
    tags: Sequence[str] = (),
    room_namer=None,
) -> Environment:
    """Generate a connected multi-room world.

    Pure function of its arguments: the same inputs always produce an
    identical environment.  ``tags`` names are assigned to rooms 0, 1, ... in
    order (e.g. ``("hospital",)`` makes room 0 the hospital).  ``room_namer``
    may supply display names for the remaining rooms; by default rooms are
    named ``Room-{id}``.
    """
    if width < 8 or height < 8:
        raise DimensionTooSmall(f"grid must be at least 8x8, got {width}x{height}")
    if complexity not in TARGET_LEAVES:
        raise ValueError(f"complexity must be one of {sorted(TARGET_LEAVES)}")

    rng = random.Random(f"env:{seed}:{width}x{height}:{complexity}")
    target = TARGET_LEAVES[complexity]

    root = _Node((1, 1, width - 2, height - 2), (1, 1, width - 2, height - 2), 0, 0)
    leaves = [root]
    internal: list[_Node] = []
    next_order = 1
    while len(leaves) < target:
        candidates = [n for n in leaves if _split_axis_options(n)]
        if not candidates:
            break
        # Largest free area first; creation order breaks ties.
        node = min(candidates, key=lambda n: (-n.free_rect[2] * n.free_rect[3], n.order))
        axis = _split_axis_options(node)[0]
        left, right = _split(node, axis, rng, next_order)
        next_order += 2
        leaves.remove(node)
        leaves.extend((left, right))
        internal.append(node)

    # Terrain: boundary ring plus every split wall.
    terrain = [FREE] * (width * height)
    for x in range(width):
        terrain[x] = BLOCKED
        terrain[(height - 1) * width + x] = BLOCKED
    for y in range(height):
        terrain[y * width] = BLOCKED
        terrain[y * width + width - 1] = BLOCKED
    for node in internal:
        axis, pos, lo, hi = node.wall
        for t in range(lo, hi + 1):
            if axis == "x":
                terrain[t * width + pos] = BLOCKED
            else:
                terrain[pos * width + t] = BLOCKED

    # Leaf ids in reading order of their free rectangles.
    ordered = sorted(leaves, key=lambda n: (n.free_rect[1], n.free_rect[0]))
    leaf_id = {id(n): i for i, n in enumerate(ordered)}

    def leaf_at(cell: Coord) -> _Node:
        for n in leaves:
            rx, ry, rw, rh = n.rect
            if rx <= cell[0] < rx + rw and ry <= cell[1] < ry + rh:
                return n
        raise AssertionError(f"cell {cell} outside every leaf")

    # One door per split wall, at a position free on both sides.  Validity is
    # judged against the wall layout alone, so carving order cannot matter.
    doors: dict[Coord, tuple[int, int]] = {}
    node_door: dict[int, Coord] = {}
    for node in sorted(internal, key=lambda n: n.order):
        axis, pos, lo, hi = node.wall
        valid = []
        for t in range(lo, hi + 1):
            if axis == "x":
                cell, before, after = (pos, t), (pos - 1, t), (pos + 1, t)
            else:
                cell, before, after = (t, pos), (t, pos - 1), (t, pos + 1)
            sides_free = all(
                terrain[c[1] * width + c[0]] == FREE or c in doors for c in (before, after)
            )
            if sides_free:
                valid.append((cell, before, after))
        if not valid:
            raise AssertionError("split wall with no carvable door position")
        cell, before, after = valid[rng.randrange(len(valid))]
        terrain[cell[1] * width + cell[0]] = FREE
        a, b = leaf_id[id(leaf_at(before))], leaf_id[id(leaf_at(after))]
        doors[cell] = (min(a, b), max(a, b))
        node_door[node.order] = cell

    # Freeze the tree.
    tag_names = {i: t for i, t in enumerate(tags)}

    def freeze(node: _Node, next_internal: list[int]) -> RegionNode:
        if node.left is None:
            rid = leaf_id[id(node)]
            if rid in tag_names:
                name = tag_names[rid].title()
            elif room_namer is not None:
                name = room_namer(rid)
            else:
                name = f"Room-{rid}"
            fx, fy, fw, fh = node.free_rect
            desc = f"{name}, a {fw}x{fh} area"
            return RegionNode(rid, node.rect, node.free_rect, node.depth, name, desc)
        rid = next_internal[0]
        next_internal[0] += 1
        frozen = RegionNode(rid, node.rect, node.free_rect, node.depth, f"area-{rid}", "")
        frozen.door = node_door[node.order]
        frozen.left = freeze(node.left, next_internal)
        frozen.right = freeze(node.right, next_internal)
        return frozen

    tree = freeze(root, [len(leaves)])
    tag_map = {t.lower(): i for i, t in enumerate(tags) if i < len(leaves)}

    env = Environment(
        width, height, terrain, tree, doors, {}, tag_map, seed, complexity
    )
    _place_entities(env, [
        s if isinstance(s, EntitySpec) else EntitySpec.from_dict(s) for s in entity_specs
    ], rng)
    return env


def _place_entities(env: Environment, specs: list[EntitySpec], rng: random.Random) -> None:
    counters: dict[str, int] = {}

    def fresh_id(name: str) -> str:
        slug = name.lower().replace(" ", "-")
        counters[slug] = counters.get(slug, 0) + 1
        return f"{slug}-{counters[slug]}"

    taken: set[Coord] = set()

    def claim(spec: EntitySpec, cell: Coord) -> None:
        eid = fresh_id(spec.name)
        env.entities[eid] = Entity(
            eid, spec.name, spec.kind, cell, dict(spec.attributes)
        )
        taken.add(cell)

    for spec in specs:
        explicit = list(spec.locations or [])
        for cell in explicit:
            if not env.in_bounds(cell):
                raise EntityOutOfBounds(f"{spec.name} at {cell} is outside the grid")
            if not env.is_free(cell):
                raise UnplaceableEntity(f"{spec.name} at {cell} is on a blocked cell")
            claim(spec, cell)
        remaining = spec.count - len(explicit)
        if remaining <= 0:
            continue
        if spec.on_door:
            candidates = [c for c in sorted(env.doors) if c not in taken]
        else:
            excluded = {env.region_tagged(t) for t in spec.avoid_regions}
            excluded.discard(None)
            if spec.region is not None:
                rid = env.region_tagged(spec.region)
                if rid is None:
                    raise UnknownRegion(f"no region tagged {spec.region!r}")
                pool = env.region_free_cells(rid)
            else:
                pool = []
                for rid in env.leaf_ids():
                    if rid in excluded:
                        continue
                    pool.extend(env.region_free_cells(rid))
            candidates = [c for c in pool if c not in taken]
        for _ in range(remaining):
            if not candidates:
                raise UnplaceableEntity(f"no free cell left for {spec.name}")
            cell = candidates.pop(rng.randrange(len(candidates)))
            claim(spec, cell)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


def to_matrix(env: Environment, occupants: dict[int, Coord]) -> TraversabilityMatrix:
    """Overlay agent positions on the terrain grid.

    Terrain stays binary underneath; agent ids (>= 2) replace the 1 of the
    free cell they stand on.
    """
    values = [
        [env.terrain[y * env.width + x] for x in range(env.width)]
        for y in range(env.height)
    ]
    seen: set[Coord] = set()
    for agent_id in sorted(occupants):
        cell = occupants[agent_id]
        if agent_id < 2:
            raise ValueError(f"agent ids in the matrix must be >= 2, got {agent_id}")
        if not env.is_free(cell):
            raise OccupantOnBlockedCell(f"agent {agent_id} on blocked cell {cell}")
        if cell in seen:
            raise ValueError(f"two occupants on cell {cell}")
        seen.add(cell)
        values[cell[1]][cell[0]] = agent_id
    return TraversabilityMatrix(env.width, env.height, values)


def room_of(env: Environment, cell: Coord) -> int:
    """Room containing a cell; door cells resolve to the smaller room id."""
    if not env.in_bounds(cell) or env.is_boundary(cell):
        raise OutOfBounds(f"cell {cell} is outside the interior")
    if cell in env.doors:
        return env.doors[cell][0]
    for leaf in env.leaves.values():
        rx, ry, rw, rh = leaf.rect
        if rx <= cell[0] < rx + rw and ry <= cell[1] < ry + rh:
            return leaf.id
    raise AssertionError(f"interior cell {cell} outside every room rectangle")


def adjacent_rooms(env: Environment, region_id: int) -> list[int]:
    """Ids of rooms sharing a door with this one, ascending."""
    if region_id not in env.leaves:
        raise UnknownRegion(f"region {region_id} is not a room")
    return sorted({n for n, _ in env.adjacency[region_id]})


def shortest_path(
    env: Environment,
    start: Coord,
    goal: Coord,
    extra_blocked: Iterable[Coord] = (),
) -> list[Coord]:
    """Minimum-length 4-connected path over free cells, endpoints included.

    ``extra_blocked`` lets callers exclude cells that are dynamically
    impassable (e.g. an obstructed door) without touching the terrain.
    """
    blocked = set(extra_blocked)
    for endpoint in (start, goal):
        if not env.is_free(endpoint) or endpoint in blocked:
            raise BlockedEndpoint(f"endpoint {endpoint} is not traversable")
    if start == goal:
        return [start]

    # A* with Manhattan heuristic; the BFS oracle in the tests checks length.
    def h(c: Coord) -> int:
        return abs(c[0] - goal[0]) + abs(c[1] - goal[1])

    frontier: list[tuple[int, int, int, Coord]] = [(h(start), 0, 0, start)]
    came_from: dict[Coord, Coord] = {}
    g_score = {start: 0}
    counter = 1
    while frontier:
        _, g, _, current = heapq.heappop(frontier)
        if current == goal:
            path = [current]
            while current != start:
                current = came_from[current]
                path.append(current)
            path.reverse()
            return path
        if g > g_score.get(current, g):
            continue
        for dx, dy in NEIGHBOR_STEPS:
            nxt = (current[0] + dx, current[1] + dy)
            if not env.is_free(nxt) or nxt in blocked:
                continue
            ng = g + 1
            if ng < g_score.get(nxt, ng + 1):
                g_score[nxt] = ng
                came_from[nxt] = current
                heapq.heappush(frontier, (ng + h(nxt), ng, counter, nxt))
                counter += 1
    raise NoPath(f"no route from {start} to {goal}")


def region_routes(
    env: Environment,
    from_region: int,
    blocked_doors: Iterable[Coord] = (),
) -> dict[int, dict]:
    """Route cues: for every other room, the next room to enter and the door.

    Breadth-first over the room graph, so hop counts are minimal.  Doors in
    ``blocked_doors`` (e.g. obstructed by debris) are not traversed.
    """
    if from_region not in env.leaves:
        raise UnknownRegion(f"region {from_region} is not a room")
    blocked = set(blocked_doors)
    routes: dict[int, dict] = {}
    queue = deque([from_region])
    seen = {from_region}
    first_hop: dict[int, tuple[int, Coord]] = {}
    hops = {from_region: 0}
    while queue:
        current = queue.popleft()
        for neighbor, door in env.adjacency[current]:
            if neighbor in seen or door in blocked:
                continue
            seen.add(neighbor)
            hops[neighbor] = hops[current] + 1
            first_hop[neighbor] = first_hop.get(current, (neighbor, door))
            routes[neighbor] = {
                "next_region": first_hop[neighbor][0],
                "door": first_hop[neighbor][1],
                "hops": hops[neighbor],
            }
            queue.append(neighbor)
    return routes
