"""World generation for the two-player dot selection game.

A world is a set of dots on a continuous 2D plane, each with a size and a
grayscale color, plus two circular agent views that overlap so that exactly
``num_shared`` dots are visible to both agents. Each agent sees exactly 7
dots. All attributes are sampled uniformly at random, subject to the
geometric constraints below.

Randomness comes from numpy's PCG64 generator (``np.random.default_rng``),
so worlds are reproducible across platforms from (num_shared, seed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Canonical frame: views are unit circles placed symmetrically about the
# origin on the x-axis, separated by a sampled offset distance.
VIEW_RADIUS = 1.0
OFFSET_RANGE = (0.2, 1.2)

NUM_VISIBLE = 7
SHARED_CHOICES = (4, 5, 6)

# Dots must stay visually distinct and clear of view boundaries.
MIN_DISTANCE = 0.12 * VIEW_RADIUS
EDGE_MARGIN = 0.03 * VIEW_RADIUS
MAX_REJECT = 10_000

SIZE_MIN = 8.0
SIZE_RANGE = 7.0
SIZE_MAX = SIZE_MIN + SIZE_RANGE
COLOR_MIN = 25.0
COLOR_MAX = 205.0


class GenerationError(Exception):
    """Rejection sampling failed to place all dots within MAX_REJECT draws."""


@dataclass(frozen=True)
class Entity:
    """One dot: position in world coordinates, size and grayscale color."""

    id: int
    x: float
    y: float
    size: float
    color: float


@dataclass(frozen=True)
class AgentView:
    center_x: float
    center_y: float
    radius: float
    visible_ids: tuple[int, ...]  # ascending, length 7


@dataclass(frozen=True)
class World:
    world_id: str
    num_shared: int
    entities: tuple[Entity, ...]
    views: tuple[AgentView, AgentView]
    seed: int

    def entity(self, entity_id: int) -> Entity:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise KeyError(entity_id)


class Observation:
    """Per-agent normalized view: 7 rows of (x_rel, y_rel, size, color).

    Rows are ordered by entity id ascending; every component lies strictly
    inside (-1, 1). Flattened, this is the 28-component context vector.
    """

    def __init__(self, agent: int, rows: np.ndarray, entity_ids: tuple[int, ...]):
        self.agent = agent
        self.rows = rows
        self.entity_ids = entity_ids

    def flat(self) -> np.ndarray:
        return self.rows.reshape(-1)

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "rows": [[float(v) for v in row] for row in self.rows],
            "entity_ids": list(self.entity_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Observation":
        return cls(int(d["agent"]), np.asarray(d["rows"], dtype=np.float64),
                   tuple(int(i) for i in d["entity_ids"]))


def _sample_in_region(rng, cx_own, cx_other, want_shared, placed, budget):
    """Draw a point uniformly from the lens (shared) or own crescent.

    Rejection sampling from the own-view bounding box; also enforces the
    minimum pairwise distance against already placed points. Returns the
    point and the number of draws consumed, or None if the local retry cap
    is hit (caller restarts the layout).
    """
    inner = VIEW_RADIUS - EDGE_MARGIN
    outer = VIEW_RADIUS + EDGE_MARGIN
    draws = 0
    while draws < min(budget, 1000):
        draws += 1
        x = rng.uniform(cx_own - inner, cx_own + inner)
        y = rng.uniform(-inner, inner)
        d_own = math.hypot(x - cx_own, y)
        d_other = math.hypot(x - cx_other, y)
        if d_own > inner:
            continue
        if want_shared and d_other > inner:
            continue
        if not want_shared and d_other < outer:
            continue
        if any(math.hypot(x - px, y - py) < MIN_DISTANCE for px, py in placed):
            continue
        return (x, y), draws
    return None, draws


def _sample_attr(rng, lo: float, hi: float) -> float:
    # Open-interval guard: exact endpoints would normalize onto +-1.
    while True:
        v = rng.uniform(lo, hi)
        if lo < v < hi:
            return v


def generate_world(k: int, seed: int) -> World:
    """Generate a world with exactly ``k`` shared dots, deterministically.

    The view-center offset is itself sampled, so the overlap geometry
    varies across seeds. Raises GenerationError if placement does not
    succeed within MAX_REJECT candidate draws (cannot happen at the
    shipped constants).
    """
    if k not in SHARED_CHOICES:
        raise ValueError(f"num_shared must be one of {SHARED_CHOICES}, got {k}")
    rng = np.random.default_rng(seed)
    n_exclusive = NUM_VISIBLE - k
    n_total = 2 * NUM_VISIBLE - k

    budget = MAX_REJECT
    while budget > 0:
        offset = rng.uniform(*OFFSET_RANGE)
        centers = (-offset / 2.0, offset / 2.0)
        placed: list[tuple[float, float]] = []
        groups = [(centers[0], centers[1], True)] * k
        groups += [(centers[0], centers[1], False)] * n_exclusive
        groups += [(centers[1], centers[0], False)] * n_exclusive
        ok = True
        for cx_own, cx_other, shared in groups:
            point, draws = _sample_in_region(rng, cx_own, cx_other, shared, placed, budget)
            budget -= draws
            if point is None:
                ok = False
                break
            placed.append(point)
        if not ok:
            continue

        # Shuffled ids so id order reveals nothing about which dots are shared.
        ids = rng.permutation(n_total)
        entities = tuple(
            Entity(
                id=int(ids[i]),
                x=placed[i][0],
                y=placed[i][1],
                size=_sample_attr(rng, SIZE_MIN, SIZE_MAX),
                color=_sample_attr(rng, COLOR_MIN, COLOR_MAX),
            )
            for i in range(n_total)
        )
        shared_ids = sorted(int(ids[i]) for i in range(k))
        own0 = sorted(int(ids[i]) for i in range(k, k + n_exclusive))
        own1 = sorted(int(ids[i]) for i in range(k + n_exclusive, n_total))
        views = (
            AgentView(centers[0], 0.0, VIEW_RADIUS, tuple(sorted(shared_ids + own0))),
            AgentView(centers[1], 0.0, VIEW_RADIUS, tuple(sorted(shared_ids + own1))),
        )
        return World(
            world_id=f"w-{k}-{seed}",
            num_shared=k,
            entities=entities,
            views=views,
            seed=seed,
        )
    raise GenerationError(
        f"could not place {n_total} dots within {MAX_REJECT} draws (k={k}, seed={seed})"
    )


def observe(world: World, agent: int) -> Observation:
    """Normalized observation of one agent's 7 visible dots, id-ascending."""
    view = world.views[agent]
    by_id = {e.id: e for e in world.entities}
    ids = tuple(sorted(view.visible_ids))
    rows = np.empty((NUM_VISIBLE, 4), dtype=np.float64)
    for i, eid in enumerate(ids):
        e = by_id[eid]
        rows[i, 0] = (e.x - view.center_x) / view.radius
        rows[i, 1] = (e.y - view.center_y) / view.radius
        rows[i, 2] = 2.0 * (e.size - SIZE_MIN) / SIZE_RANGE - 1.0
        rows[i, 3] = 2.0 * (e.color - COLOR_MIN) / (COLOR_MAX - COLOR_MIN) - 1.0
    return Observation(agent=agent, rows=rows, entity_ids=ids)


def structural_violations(world: World) -> list[str]:
    """Invariants the game rules depend on: entity bookkeeping and the
    shared-count contract, independent of generator geometry.

    Imported worlds must pass these even when their coordinates come from
    a different generator.
    """
    out: list[str] = []
    k = world.num_shared
    n_total = 2 * NUM_VISIBLE - k
    by_id: dict[int, Entity] = {}
    for e in world.entities:
        if e.id in by_id:
            out.append(f"id_unique: duplicate entity id {e.id}")
        by_id[e.id] = e

    if len(world.entities) != n_total:
        out.append(f"entity_count: expected {n_total} entities, got {len(world.entities)}")

    for a, view in enumerate(world.views):
        if len(view.visible_ids) != NUM_VISIBLE:
            out.append(f"view_size: view {a} lists {len(view.visible_ids)} ids, expected {NUM_VISIBLE}")
        if list(view.visible_ids) != sorted(view.visible_ids):
            out.append(f"view_order: view {a} ids not ascending")
        for eid in view.visible_ids:
            if eid not in by_id:
                out.append(f"unknown_id: view {a} lists id {eid} with no entity")

    shared = set(world.views[0].visible_ids) & set(world.views[1].visible_ids)
    if len(shared) != k:
        out.append(f"shared_count: expected {k} shared ids, got {len(shared)}")

    seen = set(world.views[0].visible_ids) | set(world.views[1].visible_ids)
    for e in world.entities:
        if e.id not in seen:
            out.append(f"orphan: entity {e.id} visible to no agent")
    return out


def validate_world(world: World) -> list[str]:
    """Check every world invariant; returns [] iff the world is valid.

    Each violation is a string naming the invariant and the offending ids.
    """
    out = structural_violations(world)
    k = world.num_shared
    by_id = {e.id: e for e in world.entities}

    for e in world.entities:
        if not (SIZE_MIN <= e.size <= SIZE_MAX):
            out.append(f"size_range: entity {e.id} size {e.size:.4f} outside [{SIZE_MIN}, {SIZE_MAX}]")
        if not (COLOR_MIN <= e.color <= COLOR_MAX):
            out.append(f"color_range: entity {e.id} color {e.color:.4f} outside [{COLOR_MIN}, {COLOR_MAX}]")

    for a, view in enumerate(world.views):
        for eid in view.visible_ids:
            e = by_id.get(eid)
            if e is None:
                continue
            dist = math.hypot(e.x - view.center_x, e.y - view.center_y)
            if dist > view.radius - EDGE_MARGIN + 1e-12:
                out.append(
                    f"in_radius: entity {eid} at distance {dist:.4f} from view {a} center"
                    f" (limit {view.radius - EDGE_MARGIN:.4f})"
                )

    shared = set(world.views[0].visible_ids) & set(world.views[1].visible_ids)
    ents = sorted(world.entities, key=lambda e: e.id)
    for i in range(len(ents)):
        for j in range(i + 1, len(ents)):
            d = math.hypot(ents[i].x - ents[j].x, ents[i].y - ents[j].y)
            if d < MIN_DISTANCE - 1e-12:
                out.append(
                    f"min_distance: entities {ents[i].id},{ents[j].id} at distance {d:.4f}"
                    f" (minimum {MIN_DISTANCE:.4f})"
                )

    for a, view in enumerate(world.views):
        other = world.views[1 - a]
        for eid in view.visible_ids:
            if eid in shared or eid not in by_id:
                continue
            e = by_id[eid]
            d = math.hypot(e.x - other.center_x, e.y - other.center_y)
            if d < other.radius + EDGE_MARGIN - 1e-12:
                out.append(
                    f"exclusive_margin: entity {eid} (agent {a} only) at distance {d:.4f}"
                    f" from the other view center (minimum {other.radius + EDGE_MARGIN:.4f})"
                )
    return out


def world_to_dict(world: World) -> dict:
    return {
        "world_id": world.world_id,
        "num_shared": world.num_shared,
        "entities": [
            {"id": e.id, "x": e.x, "y": e.y, "size": e.size, "color": e.color}
            for e in world.entities
        ],
        "views": [
            {
                "center_x": v.center_x,
                "center_y": v.center_y,
                "radius": v.radius,
                "visible_ids": list(v.visible_ids),
            }
            for v in world.views
        ],
        "seed": world.seed,
    }


def world_from_dict(d: dict) -> World:
    entities = tuple(
        Entity(int(e["id"]), float(e["x"]), float(e["y"]), float(e["size"]), float(e["color"]))
        for e in d["entities"]
    )
    views = tuple(
        AgentView(
            float(v["center_x"]),
            float(v["center_y"]),
            float(v["radius"]),
            tuple(int(i) for i in v["visible_ids"]),
        )
        for v in d["views"]
    )
    return World(
        world_id=str(d["world_id"]),
        num_shared=int(d["num_shared"]),
        entities=entities,
        views=(views[0], views[1]),
        seed=int(d["seed"]),
    )
