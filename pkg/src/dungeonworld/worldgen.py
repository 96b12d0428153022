"""Guided dungeon-world generation.

Produces the full metadata backbone from a config + seed: a connected
dungeon graph with annotated elements (planes, composite bounding volumes,
categories, dungeon tags), sealed corridor connectors with portal polygons,
dual mesh sets (simple deploy meshes and geometrically identical bake
meshes), indexed torch point lights, per-dungeon height maps and
heading-constraint (singularity) tables.

Determinism contract: generate_world is a pure function of the config
(which embeds the seed); generating twice yields byte-identical canonical
serializations.  All randomness flows through named child streams so a
change to one dungeon spec does not reshuffle the others.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

from .drng import Stream
from .geometry import (
    UP,
    BoundingVolume,
    ConvexPolygon3,
    MeshBuffer,
    Obb,
    Plane,
    Vec3,
    convex_polygon_2d_area,
    point_in_convex_2d,
    signed_distance,
)
from .lattice import GridFrame

CONNECTOR_KINDS = ("gate", "door", "tunnel", "stairs")

ELEMENT_CATEGORIES = (
    "wall", "floor", "ceiling", "column", "gate", "door", "torch",
    "stair_step", "stair_base", "tunnel_section",
)

SURFACE_THICKNESS = 0.3    # volume slab straddling each planar surface
MIN_INTERIOR_HEIGHT = 3.4  # 2x player height
MIN_EDGE_LENGTH = 5.2
ORTHO_BAND_DEG = 2.0       # forbidden dihedral band around 90 degrees
STEP_RISE = 0.2
STEP_RUN = 0.45
LANDING_LEN = 1.2
STAIRS_HEIGHT = 4.6
EDGE_MARGIN = 0.35         # clearance kept between an opening and edge ends
GATE_TAPER = 0.8           # top/bottom width ratio of the distorted gate arch


class WorldGenError(ValueError):
    """Raised when a config cannot be realized (with a diagnostic)."""


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class DungeonSpec:
    id: str
    name: str
    side_count: int
    radius: tuple[float, float]
    floor_altitude: float
    has_stairs: bool = False
    has_columns: bool = True
    has_torches: bool = True
    progression_index: int = 0
    column_density: Optional[float] = None

    @staticmethod
    def from_json(d: dict) -> "DungeonSpec":
        return DungeonSpec(
            id=d["id"],
            name=d.get("name", d["id"]),
            side_count=int(d["side_count"]),
            radius=(float(d["radius"][0]), float(d["radius"][1])),
            floor_altitude=float(d.get("floor_altitude", 0.0)),
            has_stairs=bool(d.get("has_stairs", False)),
            has_columns=bool(d.get("has_columns", True)),
            has_torches=bool(d.get("has_torches", True)),
            progression_index=int(d["progression_index"]),
            column_density=(None if d.get("column_density") is None
                            else float(d["column_density"])),
        )

    def to_json(self) -> dict:
        return {
            "id": self.id, "name": self.name, "side_count": self.side_count,
            "radius": list(self.radius), "floor_altitude": self.floor_altitude,
            "has_stairs": self.has_stairs, "has_columns": self.has_columns,
            "has_torches": self.has_torches,
            "progression_index": self.progression_index,
            "column_density": self.column_density,
        }

    def mean_radius(self) -> float:
        return (self.radius[0] + self.radius[1]) / 2.0


@dataclass
class GlobalStyle:
    wall_height: tuple[float, float] = (3.8, 4.6)
    ceiling_incline: tuple[float, float] = (0.02, 0.09)  # radians
    column_density: tuple[float, float] = (0.15, 0.4)
    voxel_size: float = 0.45   # half the default camera collision diameter
    grid_layers: int = 3
    camera_altitude_range: tuple[float, float] = (1.0, 3.2)  # above floor levels
    column_clearance: float = 2.2
    column_wall_clearance: float = 1.8
    flight_clearance: float = 2.8

    @staticmethod
    def from_json(d: dict) -> "GlobalStyle":
        s = GlobalStyle()
        for key in ("wall_height", "ceiling_incline", "column_density",
                    "camera_altitude_range"):
            if key in d:
                setattr(s, key, (float(d[key][0]), float(d[key][1])))
        s.voxel_size = float(d.get("voxel_size", s.voxel_size))
        s.grid_layers = int(d.get("grid_layers", s.grid_layers))
        s.column_clearance = float(d.get("column_clearance", s.column_clearance))
        s.column_wall_clearance = float(d.get("column_wall_clearance",
                                              s.column_wall_clearance))
        s.flight_clearance = float(d.get("flight_clearance", s.flight_clearance))
        return s

    def to_json(self) -> dict:
        return {
            "wall_height": list(self.wall_height),
            "ceiling_incline": list(self.ceiling_incline),
            "column_density": list(self.column_density),
            "voxel_size": self.voxel_size,
            "grid_layers": self.grid_layers,
            "camera_altitude_range": list(self.camera_altitude_range),
            "column_clearance": self.column_clearance,
            "column_wall_clearance": self.column_wall_clearance,
            "flight_clearance": self.flight_clearance,
        }


@dataclass
class WorldConfig:
    seed: int
    dungeons: list[DungeonSpec]
    connections: list[tuple[str, str, str]]
    style: GlobalStyle = field(default_factory=GlobalStyle)

    @staticmethod
    def from_json(d: dict, seed: Optional[int] = None) -> "WorldConfig":
        return WorldConfig(
            seed=int(d.get("seed", 0)) if seed is None else int(seed),
            dungeons=[DungeonSpec.from_json(x) for x in d["dungeons"]],
            connections=[(c[0], c[1], c[2]) for c in d["connections"]],
            style=GlobalStyle.from_json(d.get("style", {})),
        )

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "dungeons": [s.to_json() for s in self.dungeons],
            "connections": [list(c) for c in self.connections],
            "style": self.style.to_json(),
        }

    def validate(self) -> None:
        ids = [s.id for s in self.dungeons]
        if len(set(ids)) != len(ids):
            raise WorldGenError("duplicate dungeon ids in config")
        if not self.dungeons:
            raise WorldGenError("config declares no dungeons")
        known = set(ids)
        for a, b, kind in self.connections:
            if a not in known or b not in known:
                raise WorldGenError(f"connection references unknown dungeon: {a}-{b}")
            if a == b:
                raise WorldGenError(f"self-connection on {a}")
            if kind not in CONNECTOR_KINDS:
                raise WorldGenError(f"unknown connector kind {kind!r}")
        prog = sorted(s.progression_index for s in self.dungeons)
        if prog != list(range(len(self.dungeons))):
            raise WorldGenError("progression indices must form a permutation of 0..N-1")
        for s in self.dungeons:
            if s.side_count < 5:
                raise WorldGenError(f"{s.id}: side_count must be >= 5")
            if not (0 < s.radius[0] <= s.radius[1]):
                raise WorldGenError(f"{s.id}: invalid radius range")
            if s.radius[0] < 4.2:
                raise WorldGenError(f"{s.id}: radius too small for opening margins")
        alt = {s.id: s.floor_altitude for s in self.dungeons}
        for a, b, kind in self.connections:
            da = abs(alt[a] - alt[b])
            if kind == "stairs" and da < 0.5:
                raise WorldGenError(f"stairs {a}-{b} needs a floor altitude delta >= 0.5")
            if kind != "stairs" and da > 1e-9:
                raise WorldGenError(f"{kind} {a}-{b} requires equal floor altitudes")
        if not _is_connected(ids, self.connections):
            raise WorldGenError("connection graph is not connected")


def _is_connected(ids: list[str], connections) -> bool:
    adj: dict[str, set[str]] = {i: set() for i in ids}
    for a, b, _ in connections:
        adj[a].add(b)
        adj[b].add(a)
    seen = {ids[0]}
    frontier = [ids[0]]
    while frontier:
        cur = frontier.pop()
        for nxt in sorted(adj[cur]):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen == set(ids)


# ---------------------------------------------------------------------------
# Generated artifacts


@dataclass
class Element:
    id: str
    category: str
    dungeon: str
    volume: BoundingVolume
    planes: list[Plane]
    deploy_mesh: str
    bake_mesh: str


@dataclass
class HeightMap:
    frame: GridFrame
    data: list[Optional[float]]  # row-major iz * nx + ix; None outside support

    def sample_cell(self, ix: int, iz: int) -> Optional[float]:
        if 0 <= ix < self.frame.nx and 0 <= iz < self.frame.nz:
            return self.data[iz * self.frame.nx + ix]
        return None


# Heading-constraint codes.
FREE, FORBIDDEN, CONSTRAIN_LEFT, CONSTRAIN_RIGHT = 0, 1, 2, 3
HEADING_BUCKETS = 16


@dataclass
class SingularityTable:
    frame: GridFrame
    entries: list[int]        # packed 2 bits per bucket; -1 for out-of-domain cells
    no_fly: list[tuple[int, int]]

    def constraint(self, ix: int, iz: int, bucket: int) -> int:
        if not (0 <= ix < self.frame.nx and 0 <= iz < self.frame.nz):
            return FORBIDDEN
        packed = self.entries[iz * self.frame.nx + ix]
        if packed < 0:
            return FORBIDDEN
        return (packed >> (2 * bucket)) & 0x3


def heading_bucket(heading_x: float, heading_z: float) -> int:
    th = math.atan2(-heading_z, heading_x) % (2.0 * math.pi)
    return min(HEADING_BUCKETS - 1, int(th / (2.0 * math.pi / HEADING_BUCKETS)))


def heading_vector(bucket: int) -> tuple[float, float]:
    th = (bucket + 0.5) * 2.0 * math.pi / HEADING_BUCKETS
    return math.cos(th), -math.sin(th)


@dataclass
class Dungeon:
    id: str
    name: str
    center: Vec3
    footprint: ConvexPolygon3         # at floor altitude, CCW about +y
    floor_altitude: float
    wall_height: float
    floor_plane: Plane
    ceiling_plane: Plane              # normal points down into the room
    wall_planes: list[Plane]          # inward normals, one per footprint edge
    elements: list[str]
    connectors: list[str]
    progression_index: int
    height_map: Optional[HeightMap] = None

    def footprint_xz(self) -> list[tuple[float, float]]:
        return [(v.x, v.z) for v in self.footprint.vertices]

    def ceiling_y(self, x: float, z: float) -> float:
        n = self.ceiling_plane.normal
        return (self.ceiling_plane.offset - n.x * x - n.z * z) / n.y

    def max_ceiling_y(self) -> float:
        return max(self.ceiling_y(v.x, v.z) for v in self.footprint.vertices)

    def min_interior_height(self) -> float:
        return min(self.ceiling_y(v.x, v.z) for v in self.footprint.vertices) \
            - self.floor_altitude

    def contains(self, p: Vec3, eps: float = 1e-9) -> bool:
        if not point_in_convex_2d(p.x, p.z, self.footprint_xz(), eps):
            return False
        return self.floor_altitude - eps <= p.y <= self.ceiling_y(p.x, p.z) + eps

    def bounding_radius(self) -> float:
        c = self.center
        return max(math.hypot(v.x - c.x, v.z - c.z) for v in self.footprint.vertices)


@dataclass
class _Attachment:
    dungeon: str
    edge: int
    cos_angle: float      # |axis . outward wall normal| at this endpoint
    hole_center_u: float  # along the edge tangent, measured from vertex `edge`


@dataclass
class Connector:
    id: str
    kind: str
    endpoints: tuple[str, str]
    attach_a: Vec3                    # opening center on A's wall plane, floor level
    attach_b: Vec3
    axis: Vec3                        # horizontal unit, A toward B
    length: float
    width_a: float
    width_b: float
    height_a: float
    height_b: float
    floor_a: float
    floor_b: float
    att_a: _Attachment
    att_b: _Attachment
    portal: ConvexPolygon3 = field(default_factory=ConvexPolygon3)
    cross_plane: Plane = field(default_factory=lambda: Plane(UP, 0.0, "cross"))
    side_planes: list[Plane] = field(default_factory=list)
    elements: list[str] = field(default_factory=list)
    section_scales: list[float] = field(default_factory=list)
    steps: list[tuple[float, float, float]] = field(default_factory=list)

    def lateral(self) -> Vec3:
        return UP.cross(self.axis).normalized()

    def width_at(self, s: float) -> float:
        t = min(1.0, max(0.0, s / self.length))
        return self.width_a + (self.width_b - self.width_a) * t

    def height_at(self, s: float) -> float:
        t = min(1.0, max(0.0, s / self.length))
        return self.height_a + (self.height_b - self.height_a) * t

    def support_altitude(self, s: float) -> float:
        """Walkable floor altitude at station s (step-quantized on stairs)."""
        if self.kind != "stairs":
            return self.floor_a
        for s0, s1, alt in self.steps:
            if s0 <= s < s1:
                return alt
        if s < LANDING_LEN:
            return self.floor_a
        return self.floor_b

    def ceiling_altitude(self, s: float) -> float:
        t = min(1.0, max(0.0, s / self.length))
        ca = self.floor_a + self.height_a
        cb = self.floor_b + self.height_b
        return ca + (cb - ca) * t

    def station_of(self, p: Vec3) -> float:
        d = p.sub(self.attach_a)
        return d.x * self.axis.x + d.z * self.axis.z

    def lateral_of(self, p: Vec3) -> float:
        lat = self.lateral()
        d = p.sub(self.attach_a)
        return d.x * lat.x + d.z * lat.z

    def contains(self, p: Vec3, eps: float = 1e-9) -> bool:
        s = self.station_of(p)
        if s < -eps or s > self.length + eps:
            return False
        if abs(self.lateral_of(p)) > self.width_at(s) / 2.0 + eps:
            return False
        s_c = min(max(s, 0.0), self.length)
        return (self.support_altitude(s_c) - eps <= p.y
                <= self.ceiling_altitude(s) + eps)

    def attachment_for(self, dungeon_id: str) -> _Attachment:
        if dungeon_id == self.endpoints[0]:
            return self.att_a
        if dungeon_id == self.endpoints[1]:
            return self.att_b
        raise KeyError(dungeon_id)

    def other_end(self, dungeon_id: str) -> str:
        a, b = self.endpoints
        if dungeon_id == a:
            return b
        if dungeon_id == b:
            return a
        raise KeyError(dungeon_id)

    def hole_half_width(self, dungeon_id: str) -> float:
        att = self.attachment_for(dungeon_id)
        w = self.width_a if dungeon_id == self.endpoints[0] else self.width_b
        return w / 2.0 / max(att.cos_angle, 0.2)

    def hull_obb(self) -> Obb:
        lat = self.lateral()
        y_lo = min(self.floor_a, self.floor_b) - 0.4
        y_hi = max(self.floor_a + self.height_a, self.floor_b + self.height_b)
        mid = self.attach_a.add(self.axis.scale(self.length / 2.0))
        center = Vec3(mid.x, (y_lo + y_hi) / 2.0, mid.z)
        half = Vec3(self.length / 2.0 + 0.3, (y_hi - y_lo) / 2.0,
                    max(self.width_a, self.width_b) / 2.0 + SURFACE_THICKNESS)
        return Obb(center, half, (self.axis, UP, lat))


@dataclass
class PointLight:
    id: str
    position: Vec3
    intensity: float
    color: tuple[float, float, float]
    dungeon: str
    source_element: str


@dataclass
class World:
    seed: int
    config: WorldConfig
    dungeons: dict[str, Dungeon]
    connectors: dict[str, Connector]
    elements: dict[str, Element]
    meshes: dict[str, MeshBuffer]
    lights: list[PointLight]
    singularity: dict[str, SingularityTable]

    def dungeon_ids(self) -> list[str]:
        return sorted(self.dungeons.keys())

    def elements_by_dungeon(self) -> dict[str, list[Element]]:
        out: dict[str, list[Element]] = {d: [] for d in self.dungeons}
        for eid in sorted(self.elements.keys()):
            e = self.elements[eid]
            out[e.dungeon].append(e)
        return out

    def connectors_of(self, dungeon_id: str) -> list[Connector]:
        return [self.connectors[c] for c in sorted(self.connectors.keys())
                if dungeon_id in self.connectors[c].endpoints]

    def deploy_meshes(self) -> list[MeshBuffer]:
        return [self.meshes[e.deploy_mesh] for e in sorted_elements(self)]

    def bake_meshes(self) -> list[MeshBuffer]:
        return [self.meshes[e.bake_mesh] for e in sorted_elements(self)]

    def floor_range(self) -> tuple[float, float]:
        floors = [d.floor_altitude for d in self.dungeons.values()]
        return min(floors), max(floors)

    def ceiling_top(self) -> float:
        return max(d.max_ceiling_y() for d in self.dungeons.values())


def sorted_elements(world: World) -> list[Element]:
    return [world.elements[k] for k in sorted(world.elements.keys())]


# ---------------------------------------------------------------------------
# Footprint shaping


def _footprint_vertices(rng: Stream, side_count: int, radius: tuple[float, float],
                        max_attempts: int = 400) -> list[tuple[float, float]]:
    """Convex CCW (about +y) polygon with no interior dihedral near 90 degrees
    and no edge shorter than the opening margin requires."""
    lo_band = math.radians(90.0 - (ORTHO_BAND_DEG + 1.0))
    hi_band = math.radians(90.0 + (ORTHO_BAND_DEG + 1.0))
    for attempt in range(max_attempts):
        sub = rng.child("try", attempt)
        base_r = sub.uniform(*radius)
        start = sub.uniform(0.0, 2.0 * math.pi)
        n = side_count
        angles = sorted(start + i * 2.0 * math.pi / n
                        + sub.uniform(-0.18, 0.18) * 2.0 * math.pi / n
                        for i in range(n))
        verts = []
        for th in angles:
            r = base_r * sub.uniform(0.9, 1.1)
            verts.append((r * math.cos(th), -r * math.sin(th)))
        if _footprint_ok(verts, lo_band, hi_band):
            return verts
    raise WorldGenError("could not realize a convex non-orthogonal footprint")


def _footprint_ok(verts: list[tuple[float, float]],
                  lo_band: float, hi_band: float) -> bool:
    n = len(verts)
    for i in range(n):
        ax, az = verts[i]
        bx, bz = verts[(i + 1) % n]
        cx, cz = verts[(i + 2) % n]
        e1 = (bx - ax, bz - az)
        e2 = (cx - bx, cz - bz)
        # convexity (CCW about +y): turn cross component strictly positive
        cross_y = e1[1] * e2[0] - e1[0] * e2[1]
        if cross_y <= 1e-9:
            return False
        if math.hypot(*e1) < MIN_EDGE_LENGTH:
            return False
        # angle between adjacent wall-plane normals == turn angle of the edges
        l1 = math.hypot(*e1)
        l2 = math.hypot(*e2)
        cosang = (e1[0] * e2[0] + e1[1] * e2[1]) / (l1 * l2)
        turn = math.acos(max(-1.0, min(1.0, cosang)))
        if lo_band <= turn <= hi_band:
            return False
    return True


def _rotate_xz(verts: list[tuple[float, float]], ang: float) -> list[tuple[float, float]]:
    # positive ang maps a direction of xz-angle phi to phi - ang
    c, s = math.cos(ang), math.sin(ang)
    return [(x * c + z * s, -x * s + z * c) for (x, z) in verts]


def _edge_outward_normal(verts: list[tuple[float, float]], i: int) -> tuple[float, float]:
    ax, az = verts[i]
    bx, bz = verts[(i + 1) % len(verts)]
    ex, ez = bx - ax, bz - az
    length = math.hypot(ex, ez)
    # inward is UP x edge = (ez, -ex); outward is the negation
    return (-ez / length, ex / length)


def _edge_midpoint(verts: list[tuple[float, float]], i: int) -> tuple[float, float]:
    ax, az = verts[i]
    bx, bz = verts[(i + 1) % len(verts)]
    return ((ax + bx) / 2.0, (az + bz) / 2.0)


def _edge_length(verts: list[tuple[float, float]], i: int) -> float:
    ax, az = verts[i]
    bx, bz = verts[(i + 1) % len(verts)]
    return math.hypot(bx - ax, bz - az)


def _project_interval(poly, nx, nz):
    vals = [nx * x + nz * z for x, z in poly]
    return min(vals), max(vals)


def _polys_overlap_2d(a: list[tuple[float, float]], b: list[tuple[float, float]],
                      margin: float) -> bool:
    """Convex-convex overlap in the plane (SAT), inflated by margin."""
    for poly in (a, b):
        n = len(poly)
        for i in range(n):
            ax, az = poly[i]
            bx, bz = poly[(i + 1) % n]
            ex, ez = bx - ax, bz - az
            ln = math.hypot(ex, ez)
            if ln < 1e-12:
                continue
            nx, nz = ez / ln, -ex / ln
            min1, max1 = _project_interval(a, nx, nz)
            min2, max2 = _project_interval(b, nx, nz)
            if min2 > max1 + margin or max2 < min1 - margin:
                return False
    return True


# ---------------------------------------------------------------------------
# Placement


@dataclass
class _PlacedConnector:
    index: int
    kind: str
    a: str
    b: str
    attach_a: Vec3
    attach_b: Vec3
    axis: Vec3
    length: float
    att_a: _Attachment
    att_b: _Attachment


def _connector_gap(kind: str, floor_delta: float) -> float:
    if kind == "gate":
        return 1.6
    if kind == "door":
        return 1.4
    if kind == "tunnel":
        return 7.0
    n_steps = max(3, math.ceil(abs(floor_delta) / STEP_RISE))
    return 2 * LANDING_LEN + n_steps * STEP_RUN


def _opening_dims(kind: str, spec_a: DungeonSpec, spec_b: DungeonSpec
                  ) -> tuple[float, float, float, float]:
    """(width_a, height_a, width_b, height_b) of the two wall openings."""
    if kind == "gate":
        return 3.4, 3.5, 3.4, 3.5
    if kind == "door":
        return 2.8, 3.4, 2.8, 3.4
    if kind == "stairs":
        return 3.6, STAIRS_HEIGHT, 3.6, STAIRS_HEIGHT
    wa = max(3.0, min(3.8, 0.46 * spec_a.mean_radius()))
    wb = max(3.0, min(3.8, 0.46 * spec_b.mean_radius()))
    ha = max(3.6, min(4.2, 0.52 * spec_a.mean_radius()))
    hb = max(3.6, min(4.2, 0.52 * spec_b.mean_radius()))
    return wa, ha, wb, hb


def _place_dungeons(config: WorldConfig, rng: Stream,
                    shapes: dict[str, list[tuple[float, float]]]
                    ) -> tuple[dict[str, tuple[float, float]],
                               dict[str, list[tuple[float, float]]],
                               list[_PlacedConnector]]:
    """BFS placement over a spanning tree; cycle-closing edges become oblique
    tunnels between existing walls.  Retries the whole layout with fresh
    jitter when it self-intersects or a closing edge cannot attach."""
    ids = [s.id for s in config.dungeons]
    spec_by_id = {s.id: s for s in config.dungeons}
    adj: dict[str, list[tuple[int, str, str]]] = {i: [] for i in ids}
    for idx, (a, b, kind) in enumerate(config.connections):
        adj[a].append((idx, b, kind))
        adj[b].append((idx, a, kind))

    last_error = "no placement attempted"
    for attempt in range(120):
        sub = rng.child("attempt", attempt)
        try:
            return _try_place(config, sub, shapes, ids, spec_by_id, adj)
        except WorldGenError as e:
            last_error = str(e)
    raise WorldGenError(f"placement failed after 120 attempts: {last_error}")


def _try_place(config, rng, base_shapes, ids, spec_by_id, adj):
    centers: dict[str, tuple[float, float]] = {}
    world_fp: dict[str, list[tuple[float, float]]] = {}
    used_edges: dict[str, set[int]] = {i: set() for i in ids}
    corridor_rects: list[list[tuple[float, float]]] = []
    placed: list[_PlacedConnector] = []
    done: set[int] = set()

    root = ids[0]
    centers[root] = (0.0, 0.0)
    world_fp[root] = list(base_shapes[root])
    order = [root]
    seen = {root}
    qi = 0
    while qi < len(order):
        cur = order[qi]
        qi += 1
        for idx, other, kind in sorted(adj[cur]):
            if other in seen or idx in done:
                continue
            seen.add(other)
            order.append(other)
            placed.append(_attach_tree_edge(
                config, rng.child("edge", idx), cur, other, idx, kind,
                base_shapes, centers, world_fp, used_edges, spec_by_id,
                corridor_rects))
            done.add(idx)

    for idx, (a, b, kind) in enumerate(config.connections):
        if idx in done:
            continue
        placed.append(_attach_cycle_edge(config, a, b, idx, kind, centers,
                                         world_fp, used_edges, spec_by_id,
                                         corridor_rects))
    return centers, world_fp, placed


def _corridor_rect(p_a: Vec3, p_b: Vec3, width: float) -> list[tuple[float, float]]:
    axis = Vec3(p_b.x - p_a.x, 0.0, p_b.z - p_a.z).normalized()
    lat = UP.cross(axis)
    h = width / 2.0
    return [
        (p_a.x + lat.x * h, p_a.z + lat.z * h),
        (p_b.x + lat.x * h, p_b.z + lat.z * h),
        (p_b.x - lat.x * h, p_b.z - lat.z * h),
        (p_a.x - lat.x * h, p_a.z - lat.z * h),
    ]


def _vertical_ranges_clear(spec_a: DungeonSpec, spec_b: DungeonSpec,
                           style: GlobalStyle) -> bool:
    top_a = spec_a.floor_altitude + style.wall_height[1] + 0.5
    top_b = spec_b.floor_altitude + style.wall_height[1] + 0.5
    return (spec_a.floor_altitude > top_b) or (spec_b.floor_altitude > top_a)


def _attach_tree_edge(config, rng, parent, child, idx, kind, base_shapes,
                      centers, world_fp, used_edges, spec_by_id,
                      corridor_rects) -> _PlacedConnector:
    p_fp = world_fp[parent]
    spec_p = spec_by_id[parent]
    spec_c = spec_by_id[child]
    floor_delta = spec_c.floor_altitude - spec_p.floor_altitude
    gap = _connector_gap(kind, floor_delta)
    ow_a, _, ow_b, _ = _opening_dims(kind, spec_p, spec_c)

    parent_edges = [e for e in range(len(p_fp)) if e not in used_edges[parent]
                    and _edge_length(p_fp, e) >= ow_a + 2 * EDGE_MARGIN + 0.4]
    rng.shuffle(parent_edges)
    child_shape = base_shapes[child]

    for pe in parent_edges:
        nx, nz = _edge_outward_normal(p_fp, pe)
        mx, mz = _edge_midpoint(p_fp, pe)
        axis = Vec3(nx, 0.0, nz)
        child_edges = [e for e in range(len(child_shape))
                       if _edge_length(child_shape, e) >= ow_b + 2 * EDGE_MARGIN + 0.4]
        rng.shuffle(child_edges)
        for ce in child_edges:
            cn = _edge_outward_normal(child_shape, ce)
            rot = math.atan2(cn[1], cn[0]) - math.atan2(-nz, -nx)
            rotated = _rotate_xz(child_shape, rot)
            cmx, cmz = _edge_midpoint(rotated, ce)
            p_a = Vec3(mx, spec_p.floor_altitude, mz)
            p_b = Vec3(mx + nx * gap, spec_c.floor_altitude, mz + nz * gap)
            center = (p_b.x - cmx, p_b.z - cmz)
            candidate_fp = [(x + center[0], z + center[1]) for (x, z) in rotated]

            if _polys_overlap_2d(candidate_fp, p_fp, 0.4):
                continue
            collision = False
            for other_id, fp in world_fp.items():
                if other_id == parent:
                    continue
                if _polys_overlap_2d(candidate_fp, fp, 0.8) and \
                        not _vertical_ranges_clear(spec_c, spec_by_id[other_id], config.style):
                    collision = True
                    break
            rect = _corridor_rect(p_a, p_b, max(ow_a, ow_b) + 0.6)
            if not collision:
                for other_id, fp in world_fp.items():
                    if other_id == parent:
                        continue
                    if _polys_overlap_2d(rect, fp, 0.3):
                        collision = True
                        break
            if not collision:
                for prior in corridor_rects:
                    if _polys_overlap_2d(rect, prior, 0.3) or \
                            _polys_overlap_2d(candidate_fp, prior, 0.3):
                        collision = True
                        break
            if collision:
                continue

            centers[child] = center
            world_fp[child] = candidate_fp
            used_edges[parent].add(pe)
            used_edges[child].add(ce)
            corridor_rects.append(rect)
            att_a = _Attachment(parent, pe, 1.0, _edge_length(p_fp, pe) / 2.0)
            att_b = _Attachment(child, ce, 1.0, _edge_length(candidate_fp, ce) / 2.0)
            return _PlacedConnector(idx, kind, parent, child, p_a, p_b,
                                    axis, gap, att_a, att_b)
    raise WorldGenError(f"no collision-free edge on {parent} for {child}")


_MAX_OBLIQUE = math.cos(math.radians(38.0))


def _attach_cycle_edge(config, a, b, idx, kind, centers, world_fp,
                       used_edges, spec_by_id, corridor_rects) -> _PlacedConnector:
    if kind != "tunnel":
        raise WorldGenError(f"cycle-closing connection {a}-{b} must be a tunnel")
    fp_a, fp_b = world_fp[a], world_fp[b]
    ow_a, _, ow_b, _ = _opening_dims(kind, spec_by_id[a], spec_by_id[b])
    ow = max(ow_a, ow_b)
    best = None
    for ea in range(len(fp_a)):
        if ea in used_edges[a]:
            continue
        ma = _edge_midpoint(fp_a, ea)
        na = _edge_outward_normal(fp_a, ea)
        for eb in range(len(fp_b)):
            if eb in used_edges[b]:
                continue
            mb = _edge_midpoint(fp_b, eb)
            nb = _edge_outward_normal(fp_b, eb)
            dx, dz = mb[0] - ma[0], mb[1] - ma[1]
            dist = math.hypot(dx, dz)
            if dist < 2.5:
                continue
            ux, uz = dx / dist, dz / dist
            cos_a = ux * na[0] + uz * na[1]
            cos_b = -(ux * nb[0] + uz * nb[1])
            if cos_a < _MAX_OBLIQUE or cos_b < _MAX_OBLIQUE:
                continue
            # the scaled hole must still fit on each edge
            if _edge_length(fp_a, ea) < ow / cos_a + 2 * EDGE_MARGIN:
                continue
            if _edge_length(fp_b, eb) < ow / cos_b + 2 * EDGE_MARGIN:
                continue
            if dist > 26.0:
                continue
            score = cos_a + cos_b - dist * 0.05
            if best is None or score > best[0]:
                best = (score, ea, eb, ma, mb, (ux, uz), dist, cos_a, cos_b)
    if best is None:
        raise WorldGenError(f"cannot close cycle {a}-{b}: no attachable edge pair")
    _, ea, eb, ma, mb, (ux, uz), dist, cos_a, cos_b = best

    floor = spec_by_id[a].floor_altitude
    p_a = Vec3(ma[0], floor, ma[1])
    p_b = Vec3(mb[0], floor, mb[1])
    rect = _corridor_rect(p_a, p_b, ow + 0.6)
    for other_id, fp in world_fp.items():
        if other_id in (a, b):
            continue
        if _polys_overlap_2d(rect, fp, 0.3):
            raise WorldGenError(f"cycle tunnel {a}-{b} crosses {other_id}")
    for prior in corridor_rects:
        if _polys_overlap_2d(rect, prior, 0.3):
            raise WorldGenError(f"cycle tunnel {a}-{b} crosses a corridor")
    corridor_rects.append(rect)
    used_edges[a].add(ea)
    used_edges[b].add(eb)
    att_a = _Attachment(a, ea, cos_a, _hole_u(fp_a, ea, ma))
    att_b = _Attachment(b, eb, cos_b, _hole_u(fp_b, eb, mb))
    return _PlacedConnector(idx, kind, a, b, p_a, p_b,
                            Vec3(ux, 0.0, uz), dist, att_a, att_b)


def _hole_u(fp, edge: int, point) -> float:
    ax, az = fp[edge]
    bx, bz = fp[(edge + 1) % len(fp)]
    ex, ez = bx - ax, bz - az
    length = math.hypot(ex, ez)
    return ((point[0] - ax) * ex + (point[1] - az) * ez) / length


# ---------------------------------------------------------------------------
# Element builders


class _Builder:
    """Accumulates elements and their deploy meshes for one world."""

    def __init__(self) -> None:
        self.elements: dict[str, Element] = {}
        self.meshes: dict[str, MeshBuffer] = {}

    def add(self, elem_id: str, category: str, dungeon: str, volume: BoundingVolume,
            planes: list[Plane], mesh: MeshBuffer) -> Element:
        deploy_id = f"{elem_id}:deploy"
        mesh.mesh_id = deploy_id
        mesh.category = category
        mesh.dungeon = dungeon
        elem = Element(elem_id, category, dungeon, volume, planes,
                       deploy_id, f"{elem_id}:bake")
        if elem_id in self.elements:
            raise WorldGenError(f"duplicate element id {elem_id}")
        self.elements[elem_id] = elem
        self.meshes[deploy_id] = mesh
        return elem

    def quad(self, elem_id: str, category: str, dungeon: str,
             corners: list[Vec3], normal: Vec3, planes: list[Plane],
             thickness: float = SURFACE_THICKNESS) -> Element:
        mesh = MeshBuffer(elem_id, category, dungeon)
        mesh.add_quad(corners[0], corners[1], corners[2], corners[3], normal)
        return self.add(elem_id, category, dungeon,
                        _quad_volume(corners, normal, thickness), planes, mesh)

    def tri(self, elem_id: str, category: str, dungeon: str,
            corners: list[Vec3], normal: Vec3, planes: list[Plane],
            thickness: float = SURFACE_THICKNESS) -> Element:
        mesh = MeshBuffer(elem_id, category, dungeon)
        i0 = mesh.add_vertex(corners[0], normal)
        i1 = mesh.add_vertex(corners[1], normal)
        i2 = mesh.add_vertex(corners[2], normal)
        mesh.add_triangle(i0, i1, i2)
        return self.add(elem_id, category, dungeon,
                        _quad_volume(corners, normal, thickness), planes, mesh)


def _quad_volume(corners: list[Vec3], normal: Vec3, thickness: float) -> BoundingVolume:
    centroid = Vec3(sum(c.x for c in corners) / len(corners),
                    sum(c.y for c in corners) / len(corners),
                    sum(c.z for c in corners) / len(corners))
    a1 = corners[1].sub(corners[0]).normalized()
    a3 = normal.normalized()
    a2 = a3.cross(a1)
    h1 = max(abs(c.sub(centroid).dot(a1)) for c in corners) + 1e-4
    h2 = max(abs(c.sub(centroid).dot(a2)) for c in corners) + 1e-4
    obb = Obb(centroid, Vec3(h1, h2, thickness / 2.0), (a1, a2, a3))
    return BoundingVolume.from_obb(obb)


def _polygon_slab_element(builder: _Builder, elem_id: str, category: str, dungeon: str,
                          poly: ConvexPolygon3, normal: Vec3, role: str,
                          thickness: float = SURFACE_THICKNESS) -> Element:
    mesh = MeshBuffer(elem_id, category, dungeon)
    verts = poly.vertices
    idx = [mesh.add_vertex(v, normal) for v in verts]
    for k in range(1, len(verts) - 1):
        mesh.add_triangle(idx[0], idx[k], idx[k + 1])
    centroid = poly.centroid()
    a1 = verts[1].sub(verts[0]).normalized()
    a3 = normal
    a2 = a3.cross(a1)
    h1 = max(abs(v.sub(centroid).dot(a1)) for v in verts) + 1e-4
    h2 = max(abs(v.sub(centroid).dot(a2)) for v in verts) + 1e-4
    obb = Obb(centroid, Vec3(h1, h2, thickness / 2.0), (a1, a2, a3))
    plane = Plane.from_point_normal(verts[0], normal, role)
    return builder.add(elem_id, category, dungeon, BoundingVolume.from_obb(obb),
                       [plane], mesh)


def _box_mesh(mesh: MeshBuffer, center: Vec3, axes: tuple[Vec3, Vec3, Vec3],
              half: Vec3, skip: frozenset[int] = frozenset()) -> None:
    """Box faces with outward normals; face index = axis * 2 + (0 neg, 1 pos)."""
    specs = [
        (axes[0], axes[1], axes[2], half.x, half.y, half.z),
        (axes[1], axes[2], axes[0], half.y, half.z, half.x),
        (axes[2], axes[0], axes[1], half.z, half.x, half.y),
    ]
    for axis_i, (n_axis, u_axis, v_axis, hn, hu, hv) in enumerate(specs):
        for sign_i, sign in enumerate((-1.0, 1.0)):
            if axis_i * 2 + sign_i in skip:
                continue
            n = n_axis.scale(sign)
            c = center.add(n.scale(hn))
            u = u_axis.scale(hu)
            v = v_axis.scale(hv)
            mesh.add_quad(c.sub(u).sub(v), c.add(u).sub(v),
                          c.add(u).add(v), c.sub(u).add(v), n)


def _box_element(builder: _Builder, elem_id: str, category: str, dungeon: str,
                 center: Vec3, axes: tuple[Vec3, Vec3, Vec3], half: Vec3,
                 planes: list[Plane], skip: frozenset[int] = frozenset()) -> Element:
    mesh = MeshBuffer(elem_id, category, dungeon)
    _box_mesh(mesh, center, axes, half, skip)
    obb = Obb(center, half, axes)
    return builder.add(elem_id, category, dungeon, BoundingVolume.from_obb(obb),
                       planes, mesh)


# ---------------------------------------------------------------------------
# Walls with carved openings


@dataclass
class _Opening:
    u_center: float
    bottom: float       # altitude
    top: float
    half_w_bottom: float
    half_w_top: float


def _build_wall_elements(builder: _Builder, dungeon: Dungeon,
                         openings: dict[int, list[_Opening]]) -> None:
    fp = dungeon.footprint.vertices
    n = len(fp)
    floor = dungeon.floor_altitude
    for e in range(n):
        v0, v1 = fp[e], fp[(e + 1) % n]
        tangent = v1.sub(v0).normalized()
        inward = UP.cross(tangent).normalized()
        wall_plane = dungeon.wall_planes[e]
        length = v1.dist(v0)

        def wall_point(u: float, y: float) -> Vec3:
            p = v0.add(tangent.scale(u))
            return Vec3(p.x, y, p.z)

        def ceil_at(u: float) -> float:
            p = v0.add(tangent.scale(u))
            return dungeon.ceiling_y(p.x, p.z)

        def piece(pid: str, u0: float, u1: float,
                  bottom_at: Callable[[float], float]) -> None:
            if u1 - u0 < 1e-3:
                return
            c = [wall_point(u0, bottom_at(u0)), wall_point(u1, bottom_at(u1)),
                 wall_point(u1, ceil_at(u1)), wall_point(u0, ceil_at(u0))]
            el = builder.quad(pid, "wall", dungeon.id, c, inward, [wall_plane])
            dungeon.elements.append(el.id)

        ops = sorted(openings.get(e, []), key=lambda o: o.u_center)
        cursor = 0.0
        for k, op in enumerate(ops):
            u_lo = op.u_center - op.half_w_bottom
            u_hi = op.u_center + op.half_w_bottom
            if u_lo < EDGE_MARGIN - 1e-6 or u_hi > length - EDGE_MARGIN + 1e-6:
                raise WorldGenError(
                    f"{dungeon.id}: opening does not fit on edge {e}")
            piece(f"{dungeon.id}:wall{e}:p{k}", cursor, u_lo, lambda u: floor)
            piece(f"{dungeon.id}:wall{e}:lintel{k}", u_lo, u_hi,
                  lambda u, top=op.top: top)
            if op.half_w_top < op.half_w_bottom - 1e-6:
                lo_t = op.u_center - op.half_w_top
                hi_t = op.u_center + op.half_w_top
                el = builder.tri(f"{dungeon.id}:wall{e}:wedgeL{k}", "wall", dungeon.id,
                                 [wall_point(u_lo, op.bottom), wall_point(lo_t, op.top),
                                  wall_point(u_lo, op.top)], inward, [wall_plane])
                dungeon.elements.append(el.id)
                el = builder.tri(f"{dungeon.id}:wall{e}:wedgeR{k}", "wall", dungeon.id,
                                 [wall_point(u_hi, op.bottom), wall_point(u_hi, op.top),
                                  wall_point(hi_t, op.top)], inward, [wall_plane])
                dungeon.elements.append(el.id)
            cursor = u_hi
        piece(f"{dungeon.id}:wall{e}:p{len(ops)}", cursor, length, lambda u: floor)


# ---------------------------------------------------------------------------
# Corridors


def _build_connector_geometry(builder: _Builder, conn: Connector,
                              door_fraction: float = 1.0) -> None:
    """Sealed corridor tube between the two wall openings + portal metadata.

    Oblique attachments (cycle tunnels) extend the tube past each wall plane
    so the sloped crossing is fully enclosed; the wall carve is an exact
    rectangle because oblique tubes keep a constant cross-section.
    """
    a_id, b_id = conn.endpoints
    u = conn.axis
    lat = conn.lateral()
    length = conn.length
    base = conn.attach_a

    def pt(s: float, w: float, y: float) -> Vec3:
        p = base.add(u.scale(s)).add(lat.scale(w))
        return Vec3(p.x, y, p.z)

    ext_a = 0.0
    ext_b = 0.0
    if conn.att_a.cos_angle < 0.9999:
        ext_a = conn.hole_half_width(a_id) * math.tan(math.acos(conn.att_a.cos_angle)) + 0.05
    if conn.att_b.cos_angle < 0.9999:
        ext_b = conn.hole_half_width(b_id) * math.tan(math.acos(conn.att_b.cos_angle)) + 0.05

    if conn.kind == "stairs":
        _build_stairs_interior(builder, conn, pt)
    else:
        floor = conn.floor_a
        taper = GATE_TAPER if conn.kind == "gate" else 1.0
        # the midpoint is always a section boundary: every piece of corridor
        # geometry must lie wholly on one side of the portal so that rays
        # never reach an element tagged beyond a portal they did not cross
        s_start, s_end = -ext_a, length + ext_b
        stations = [s_start]
        for lo, hi in ((s_start, length / 2.0), (length / 2.0, s_end)):
            span = hi - lo
            n = max(1, round(span / 2.5)) if conn.kind == "tunnel" else 1
            stations.extend(lo + span * (i + 1) / n for i in range(n))
        n_sections = len(stations) - 1
        conn.section_scales = [
            conn.width_at((stations[i] + stations[i + 1]) / 2.0) / conn.width_a
            for i in range(n_sections)]
        for i in range(n_sections):
            s0, s1 = stations[i], stations[i + 1]
            mid_tag = a_id if (s0 + s1) / 2.0 < length / 2.0 else b_id
            w0, w1 = conn.width_at(s0) / 2.0, conn.width_at(s1) / 2.0
            h0, h1 = conn.height_at(s0), conn.height_at(s1)
            suffix = f"{conn.id}:s{i}"
            fl = builder.quad(f"{suffix}:floor", "tunnel_section", mid_tag,
                              [pt(s0, -w0 - 0.2, floor), pt(s0, w0 + 0.2, floor),
                               pt(s1, w1 + 0.2, floor), pt(s1, -w1 - 0.2, floor)],
                              UP, [Plane(UP, floor, "floor")])
            conn.elements.append(fl.id)
            ceil_n = _tilt_down_normal(u, h0, h1, s1 - s0)
            ce = builder.quad(f"{suffix}:ceiling", "tunnel_section", mid_tag,
                              [pt(s0, -w0 * taper - 0.2, floor + h0),
                               pt(s1, -w1 * taper - 0.2, floor + h1),
                               pt(s1, w1 * taper + 0.2, floor + h1),
                               pt(s0, w0 * taper + 0.2, floor + h0)],
                              ceil_n,
                              [Plane.from_point_normal(pt(s0, 0.0, floor + h0),
                                                       ceil_n, "ceiling")])
            conn.elements.append(ce.id)
            for side, sign in (("l", -1.0), ("r", 1.0)):
                c0b = pt(s0, sign * w0, floor)
                c1b = pt(s1, sign * w1, floor)
                c1t = pt(s1, sign * w1 * taper, floor + h1)
                c0t = pt(s0, sign * w0 * taper, floor + h0)
                normal = c1b.sub(c0b).cross(c0t.sub(c0b)).normalized()
                if normal.dot(lat.scale(-sign)) < 0:
                    normal = normal.scale(-1.0)
                wl = builder.quad(f"{suffix}:wall_{side}", "tunnel_section", mid_tag,
                                  [c0b, c1b, c1t, c0t], normal,
                                  [Plane.from_point_normal(c0b, normal, "side")])
                conn.elements.append(wl.id)

    _build_portal_and_frame(builder, conn, pt, door_fraction)


def _tilt_down_normal(u: Vec3, h0: float, h1: float, ds: float) -> Vec3:
    if abs(h1 - h0) < 1e-12 or ds <= 0:
        return Vec3(0.0, -1.0, 0.0)
    d = u.scale(ds).add(UP.scale(h1 - h0)).normalized()
    lat = UP.cross(u).normalized()
    n = d.cross(lat).normalized()
    return n if n.y < 0 else n.scale(-1.0)


def _build_stairs_interior(builder: _Builder, conn: Connector, pt) -> None:
    a_id, b_id = conn.endpoints
    length = conn.length
    floor_a, floor_b = conn.floor_a, conn.floor_b
    d_h = floor_b - floor_a
    n_steps = max(3, math.ceil(abs(d_h) / STEP_RISE))
    rise = d_h / n_steps
    run = (length - 2 * LANDING_LEN) / n_steps
    w = conn.width_a / 2.0
    bottom = min(floor_a, floor_b) - 0.4
    lat = conn.lateral()
    u = conn.axis

    conn.steps = []
    mid = length / 2.0
    for k in range(n_steps):
        s0 = LANDING_LEN + k * run
        s1 = s0 + run
        tread = floor_a + (k + 1) * rise
        conn.steps.append((s0, s1, tread))
        step_plane = Plane(UP, tread, "step")
        riser_s = s0 if rise > 0 else s1
        riser = Plane.from_point_normal(pt(riser_s, 0.0, tread),
                                        u.scale(-math.copysign(1.0, rise)), "other")
        # a step straddling the portal splits so each part stays on its side
        spans = [(s0, s1)] if s1 <= mid or s0 >= mid else [(s0, mid), (mid, s1)]
        for part, (p0, p1) in enumerate(spans):
            suffix = f"{conn.id}:step{k}" + (f":{part}" if len(spans) > 1 else "")
            center = pt((p0 + p1) / 2.0, 0.0, (bottom + tread) / 2.0)
            half = Vec3((p1 - p0) / 2.0, (tread - bottom) / 2.0, w)
            el = _box_element(builder, suffix, "stair_step",
                              a_id if (p0 + p1) / 2.0 < mid else b_id,
                              center, (u, UP, lat), half, [step_plane, riser],
                              skip=frozenset({2}))
            conn.elements.append(el.id)

    for tag, s0, s1, alt, t_station in (
        (a_id, 0.0, LANDING_LEN, floor_a, LANDING_LEN),
        (b_id, length - LANDING_LEN, length, floor_b, length - LANDING_LEN),
    ):
        center = pt((s0 + s1) / 2.0, 0.0, (bottom + alt) / 2.0)
        half = Vec3((s1 - s0) / 2.0, max((alt - bottom) / 2.0, 0.05), w + 0.2)
        base_plane = Plane(UP, alt, "base")
        trans = Plane.from_point_normal(pt(t_station, 0.0, alt), u, "transition")
        el = _box_element(builder, f"{conn.id}:landing_{tag}", "stair_base", tag,
                          center, (u, UP, lat), half, [base_plane, trans],
                          skip=frozenset({2}))
        conn.elements.append(el.id)

    ceil_a = floor_a + conn.height_a
    ceil_b = floor_b + conn.height_b
    ceil_n = _tilt_down_normal(u, ceil_a, ceil_b, length)

    def ceil_at(s: float) -> float:
        return ceil_a + (ceil_b - ceil_a) * s / length

    # side walls and ceiling split at the portal so each half stays tagged
    # to the dungeon it is physically in front of
    for half_i, (h0, h1, tag) in enumerate(((0.0, mid, a_id), (mid, length, b_id))):
        for side, sign in (("l", -1.0), ("r", 1.0)):
            c0b = pt(h0, sign * w, bottom)
            c1b = pt(h1, sign * w, bottom)
            c1t = pt(h1, sign * w, ceil_at(h1))
            c0t = pt(h0, sign * w, ceil_at(h0))
            normal = lat.scale(-sign)
            el = builder.quad(f"{conn.id}:wall_{side}{half_i}", "tunnel_section",
                              tag, [c0b, c1b, c1t, c0t], normal,
                              [Plane.from_point_normal(c0b, normal, "side")])
            conn.elements.append(el.id)
        ce = builder.quad(f"{conn.id}:ceiling{half_i}", "tunnel_section", tag,
                          [pt(h0, -w - 0.2, ceil_at(h0)), pt(h1, -w - 0.2, ceil_at(h1)),
                           pt(h1, w + 0.2, ceil_at(h1)), pt(h0, w + 0.2, ceil_at(h0))],
                          ceil_n, [Plane.from_point_normal(pt(h0, 0.0, ceil_at(h0)),
                                                           ceil_n, "ceiling")])
        conn.elements.append(ce.id)


def _build_portal_and_frame(builder: _Builder, conn: Connector, pt,
                            door_fraction: float) -> None:
    a_id, b_id = conn.endpoints
    u = conn.axis
    lat = conn.lateral()
    s_mid = conn.length / 2.0
    w_mid = conn.width_at(s_mid) / 2.0
    y_lo = conn.support_altitude(s_mid)
    y_hi = conn.ceiling_altitude(s_mid)
    taper = GATE_TAPER if conn.kind == "gate" else 1.0

    cross_point = pt(s_mid, 0.0, (y_lo + y_hi) / 2.0)
    conn.cross_plane = Plane.from_point_normal(cross_point, u, "cross")
    conn.side_planes = [
        Plane.from_point_normal(pt(s_mid, -w_mid, y_lo), lat, "side"),
        Plane.from_point_normal(pt(s_mid, w_mid, y_lo), lat.scale(-1.0), "side"),
    ]
    conn.portal = ConvexPolygon3((
        pt(s_mid, -w_mid, y_lo), pt(s_mid, w_mid, y_lo),
        pt(s_mid, w_mid * taper, y_hi), pt(s_mid, -w_mid * taper, y_hi)))

    if conn.kind in ("gate", "door"):
        # decorative trim around the A-side opening; each piece carries a
        # tight volume so nothing phantom blocks the aperture itself
        tw = 0.12
        frame_mesh = MeshBuffer(f"{conn.id}:frame", conn.kind, a_id)
        frame_mesh.add_quad(
            pt(0.0, -w_mid - tw, y_hi), pt(0.0, w_mid + tw, y_hi),
            pt(0.0, w_mid + tw, y_hi + tw), pt(0.0, -w_mid - tw, y_hi + tw),
            u.scale(-1.0))
        lintel_c = pt(0.0, 0.0, y_hi + tw / 2.0)
        lintel_obb = Obb(lintel_c, Vec3(0.06, tw / 2.0 + 1e-3, w_mid + tw),
                         (u, UP, lat))
        el = builder.add(f"{conn.id}:frame", conn.kind, a_id,
                         BoundingVolume.from_obb(lintel_obb),
                         [conn.cross_plane] + conn.side_planes, frame_mesh)
        conn.elements.append(el.id)
        for side, sgn in (("l", -1.0), ("r", 1.0)):
            jamb_mesh = MeshBuffer(f"{conn.id}:jamb_{side}", conn.kind, a_id)
            jamb_mesh.add_quad(
                pt(0.0, sgn * w_mid, conn.floor_a),
                pt(0.0, sgn * (w_mid + tw), conn.floor_a),
                pt(0.0, sgn * (w_mid + tw), y_hi),
                pt(0.0, sgn * w_mid, y_hi),
                u.scale(-1.0))
            jc = pt(0.0, sgn * (w_mid + tw / 2.0), (conn.floor_a + y_hi) / 2.0)
            jamb_obb = Obb(jc, Vec3(0.06, (y_hi - conn.floor_a) / 2.0 + 1e-3,
                                    tw / 2.0 + 1e-3), (u, UP, lat))
            jel = builder.add(f"{conn.id}:jamb_{side}", conn.kind, a_id,
                              BoundingVolume.from_obb(jamb_obb),
                              conn.side_planes[:], jamb_mesh)
            conn.elements.append(jel.id)

    if conn.kind == "door":
        # sliding slab; snaps fully closed below 5% open so near-closed doors
        # seal.  It sits wholly on the B side of the cross plane so its tag
        # matches the portal a ray must cross to see it from A.
        w_full = 2.0 * w_mid
        slab_w = w_full if door_fraction < 0.05 else max(0.04, (1.0 - door_fraction) * w_full)
        x0 = -w_mid
        center = pt(s_mid + 0.075, x0 + slab_w / 2.0, (y_lo + y_hi) / 2.0)
        half = Vec3(0.06, (y_hi - y_lo) / 2.0, slab_w / 2.0)
        el = _box_element(builder, f"{conn.id}:slab", "door", b_id,
                          center, (u, UP, lat), half,
                          [conn.cross_plane] + conn.side_planes)
        conn.elements.append(el.id)


# ---------------------------------------------------------------------------
# Columns, torches, lights


def place_column_formations(dungeon: Dungeon, style: GlobalStyle, rng: Stream,
                            density: float, keep_clear: list[tuple[float, float]],
                            builder: _Builder) -> list[Element]:
    """Columns inside the footprint with mutual and wall clearance.

    keep_clear lists (x, z) connector approach points that must stay open.
    If the requested density does not fit, fewer columns are placed and a
    warning is emitted.
    """
    if density <= 0.0:
        return []
    fp = dungeon.footprint_xz()
    area = convex_polygon_2d_area(fp)
    target = int(density * area / 12.0)
    if target == 0:
        return []
    c_min = style.column_clearance
    wall_clear = style.column_wall_clearance
    placed: list[tuple[float, float, float]] = []
    min_x = min(p[0] for p in fp)
    max_x = max(p[0] for p in fp)
    min_z = min(p[1] for p in fp)
    max_z = max(p[1] for p in fp)

    attempts = 0
    max_attempts = 120 * target
    while len(placed) < target and attempts < max_attempts:
        attempts += 1
        x = rng.uniform(min_x, max_x)
        z = rng.uniform(min_z, max_z)
        r = rng.uniform(0.35, 0.55)
        if not point_in_convex_2d(x, z, fp):
            continue
        if _dist_to_boundary(x, z, fp) < wall_clear + r:
            continue
        if any(math.hypot(x - px, z - pz) < c_min for px, pz, _ in placed):
            continue
        if any(math.hypot(x - kx, z - kz) < 3.4 for kx, kz in keep_clear):
            continue
        placed.append((x, z, r))

    if len(placed) < target:
        warnings.warn(f"{dungeon.id}: column density unsatisfiable, placed "
                      f"{len(placed)}/{target}", stacklevel=2)

    out = []
    floor = dungeon.floor_altitude
    for k, (x, z, r) in enumerate(placed):
        top = dungeon.ceiling_y(x, z)
        h = top - floor
        center = Vec3(x, floor + h / 2.0, z)
        mesh = MeshBuffer("", "column", dungeon.id)
        planes = []
        ring = [Vec3(x + r * math.cos(i * math.pi / 3.0), 0.0,
                     z - r * math.sin(i * math.pi / 3.0)) for i in range(6)]
        for i in range(6):
            p0, p1 = ring[i], ring[(i + 1) % 6]
            outward = UP.cross(p1.sub(p0)).normalized().scale(-1.0)
            mesh.add_quad(Vec3(p0.x, floor, p0.z), Vec3(p1.x, floor, p1.z),
                          Vec3(p1.x, top, p1.z), Vec3(p0.x, top, p0.z), outward)
            planes.append(Plane.from_point_normal(Vec3(p0.x, floor, p0.z),
                                                  outward, "other"))
        top_idx = [mesh.add_vertex(Vec3(p.x, top, p.z), UP) for p in ring]
        for i in range(1, 5):
            mesh.add_triangle(top_idx[0], top_idx[i], top_idx[i + 1])
        obb = Obb(center, Vec3(r, h / 2.0, r), (Vec3(1, 0, 0), UP, Vec3(0, 0, 1)))
        el = builder.add(f"{dungeon.id}:column{k}", "column", dungeon.id,
                         BoundingVolume.from_obb(obb), planes, mesh)
        dungeon.elements.append(el.id)
        out.append(el)
    return out


def _dist_to_boundary(x: float, z: float, fp: list[tuple[float, float]]) -> float:
    best = math.inf
    n = len(fp)
    for i in range(n):
        ax, az = fp[i]
        bx, bz = fp[(i + 1) % n]
        ex, ez = bx - ax, bz - az
        ln2 = ex * ex + ez * ez
        t = max(0.0, min(1.0, ((x - ax) * ex + (z - az) * ez) / ln2))
        best = min(best, math.hypot(x - (ax + t * ex), z - (az + t * ez)))
    return best


def _place_torches(builder: _Builder, dungeon: Dungeon, rng: Stream,
                   openings: dict[int, list[_Opening]]) -> list[Element]:
    fp = dungeon.footprint.vertices
    n = len(fp)
    eligible = [e for e in range(n) if e not in openings]
    count = min(len(eligible), max(2, n // 2))
    rng.shuffle(eligible)
    chosen = sorted(eligible[:count])
    out = []
    floor = dungeon.floor_altitude
    for k, e in enumerate(chosen):
        v0, v1 = fp[e], fp[(e + 1) % n]
        tangent = v1.sub(v0).normalized()
        inward = UP.cross(tangent).normalized()
        mid = v0.lerp(v1, rng.uniform(0.35, 0.65))
        center = Vec3(mid.x + inward.x * 0.12, floor + 2.2, mid.z + inward.z * 0.12)
        el = _box_element(builder, f"{dungeon.id}:torch{k}", "torch", dungeon.id,
                          center, (tangent, UP, inward), Vec3(0.14, 0.2, 0.1), [],
                          skip=frozenset({4}))  # face buried in the wall
        dungeon.elements.append(el.id)
        out.append(el)
    return out


def place_torch_lights(world: World) -> list[PointLight]:
    """One point light per torch element, offset inward from its host wall."""
    lights = []
    for elem in sorted_elements(world):
        if elem.category != "torch":
            continue
        box = elem.volume.obb
        inward = box.axes[2]
        pos = box.center.add(inward.scale(0.35))
        rng = Stream(world.seed).child("light", elem.id)
        lights.append(PointLight(
            id=f"light:{elem.id}", position=pos,
            intensity=rng.uniform(4.0, 7.0), color=(1.0, 0.78, 0.5),
            dungeon=elem.dungeon, source_element=elem.id))
    return lights


# ---------------------------------------------------------------------------
# Height maps, clearance, singularity tables


def corridor_halves(world: World, dungeon_id: str) -> list[tuple[Connector, float, float]]:
    """(connector, s_lo, s_hi) station ranges owned by this dungeon."""
    out = []
    for cid in sorted(world.connectors.keys()):
        conn = world.connectors[cid]
        if conn.endpoints[0] == dungeon_id:
            out.append((conn, 0.0, conn.length / 2.0))
        elif conn.endpoints[1] == dungeon_id:
            out.append((conn, conn.length / 2.0, conn.length))
    return out


def _domain_frame(world: World, dungeon: Dungeon, voxel: float) -> GridFrame:
    xs = [v.x for v in dungeon.footprint.vertices]
    zs = [v.z for v in dungeon.footprint.vertices]
    for conn, s_lo, s_hi in corridor_halves(world, dungeon.id):
        lat = conn.lateral()
        for s in (s_lo, s_hi):
            for sgn in (-1.0, 1.0):
                p = conn.attach_a.add(conn.axis.scale(s)).add(
                    lat.scale(sgn * (conn.width_at(s) / 2.0 + 0.2)))
                xs.append(p.x)
                zs.append(p.z)
    return GridFrame.from_bbox(min(xs), min(zs), max(xs), max(zs), voxel, pad_cells=1)


def support_altitude_at(world: World, dungeon: Dungeon, x: float, z: float
                        ) -> Optional[float]:
    """Walkable floor support at (x, z): dungeon floor, or stair treads."""
    if point_in_convex_2d(x, z, dungeon.footprint_xz()):
        return dungeon.floor_altitude
    for conn, _, _ in corridor_halves(world, dungeon.id):
        p = Vec3(x, 0.0, z)
        s = conn.station_of(p)
        if s < -1e-9 or s > conn.length + 1e-9:
            continue
        if abs(conn.lateral_of(p)) <= conn.width_at(s) / 2.0 + 1e-9:
            return conn.support_altitude(min(max(s, 0.0), conn.length))
    return None


def _build_height_map(world: World, dungeon: Dungeon, voxel: float) -> HeightMap:
    frame = _domain_frame(world, dungeon, voxel)
    data: list[Optional[float]] = []
    for iz in range(frame.nz):
        for ix in range(frame.nx):
            x, z = frame.center(ix, iz)
            data.append(support_altitude_at(world, dungeon, x, z))
    return HeightMap(frame, data)


def _ray_vs_segments_2d(x, z, dx, dz, segs) -> float:
    best = math.inf
    for ax, az, bx, bz in segs:
        ex, ez = bx - ax, bz - az
        den = dx * ez - dz * ex
        if abs(den) < 1e-12:
            continue
        t = ((ax - x) * ez - (az - z) * ex) / den
        s = ((ax - x) * dz - (az - z) * dx) / den
        if t > 1e-9 and -1e-9 <= s <= 1.0 + 1e-9:
            best = min(best, t)
    return best


def _ray_vs_circles_2d(x, z, dx, dz, circles) -> float:
    best = math.inf
    for cx, cz, r in circles:
        ox, oz = x - cx, z - cz
        b = ox * dx + oz * dz
        c = ox * ox + oz * oz - r * r
        disc = b * b - c
        if disc < 0:
            continue
        t = -b - math.sqrt(disc)
        if t > 1e-9:
            best = min(best, t)
    return best


def clearance_obstacles(world: World, dungeon: Dungeon
                        ) -> tuple[list[tuple[float, float, float, float]],
                                   list[tuple[float, float, float]]]:
    """2-D wall segments (openings removed) and column circles for a dungeon."""
    segs: list[tuple[float, float, float, float]] = []
    fp = dungeon.footprint.vertices
    n = len(fp)
    spans: dict[int, list[tuple[float, float]]] = {}
    for conn, _, _ in corridor_halves(world, dungeon.id):
        att = conn.attachment_for(dungeon.id)
        hw = conn.hole_half_width(dungeon.id)
        spans.setdefault(att.edge, []).append(
            (att.hole_center_u - hw, att.hole_center_u + hw))
    for e in range(n):
        v0, v1 = fp[e], fp[(e + 1) % n]
        length = v1.dist(v0)
        cursor = 0.0
        pieces = []
        for lo, hi in sorted(spans.get(e, [])):
            pieces.append((cursor, max(cursor, lo)))
            cursor = max(cursor, hi)
        pieces.append((cursor, length))
        for u0, u1 in pieces:
            if u1 - u0 < 1e-6:
                continue
            a = v0.lerp(v1, u0 / length)
            b = v0.lerp(v1, u1 / length)
            segs.append((a.x, a.z, b.x, b.z))
    for conn, s_lo, s_hi in corridor_halves(world, dungeon.id):
        lat = conn.lateral()
        for sgn in (-1.0, 1.0):
            p0 = conn.attach_a.add(conn.axis.scale(s_lo)).add(
                lat.scale(sgn * conn.width_at(s_lo) / 2.0))
            p1 = conn.attach_a.add(conn.axis.scale(s_hi)).add(
                lat.scale(sgn * conn.width_at(s_hi) / 2.0))
            segs.append((p0.x, p0.z, p1.x, p1.z))
    circles = []
    for eid in dungeon.elements:
        elem = world.elements[eid]
        if elem.category == "column":
            box = elem.volume.obb
            circles.append((box.center.x, box.center.z,
                            max(box.half_extents.x, box.half_extents.z)))
    return segs, circles


def clearance_2d(x: float, z: float, dx: float, dz: float, segs, circles) -> float:
    return min(_ray_vs_segments_2d(x, z, dx, dz, segs),
               _ray_vs_circles_2d(x, z, dx, dz, circles))


def classify_heading(clear_fwd: float, clear_left: float, clear_right: float,
                     voxel: float) -> int:
    d_block = 1.5 * voxel
    d_constrain = 6.0 * voxel
    if clear_fwd < d_block:
        return FORBIDDEN
    if clear_fwd >= d_constrain:
        return FREE
    return CONSTRAIN_LEFT if clear_left >= clear_right else CONSTRAIN_RIGHT


def left_of(dx: float, dz: float) -> tuple[float, float]:
    """Heading rotated to its left (UP x heading)."""
    return dz, -dx


def build_singularity_tables(world: World) -> dict[str, SingularityTable]:
    """Per-dungeon heading-constraint tables over the voxel lattice.

    Each (cell, heading bucket) is classified from 2-D clearance against
    walls and columns; no-fly cells mark where the ceiling-floor gap drops
    below the configured flight clearance.
    """
    voxel = world.config.style.voxel_size
    out: dict[str, SingularityTable] = {}
    for did in world.dungeon_ids():
        dungeon = world.dungeons[did]
        frame = dungeon.height_map.frame
        segs, circles = clearance_obstacles(world, dungeon)
        entries: list[int] = []
        no_fly: list[tuple[int, int]] = []
        for iz in range(frame.nz):
            for ix in range(frame.nx):
                x, z = frame.center(ix, iz)
                support = dungeon.height_map.sample_cell(ix, iz)
                if support is None:
                    entries.append(-1)
                    continue
                packed = 0
                for b in range(HEADING_BUCKETS):
                    dx, dz = heading_vector(b)
                    fwd = clearance_2d(x, z, dx, dz, segs, circles)
                    lx, lz = left_of(dx, dz)
                    left = clearance_2d(x, z, lx, lz, segs, circles)
                    right = clearance_2d(x, z, -lx, -lz, segs, circles)
                    packed |= classify_heading(fwd, left, right, voxel) << (2 * b)
                entries.append(packed)
                ceil_y = (dungeon.ceiling_y(x, z)
                          if point_in_convex_2d(x, z, dungeon.footprint_xz())
                          else _corridor_ceiling(world, did, x, z))
                if ceil_y is not None and \
                        ceil_y - support < world.config.style.flight_clearance:
                    no_fly.append((ix, iz))
        out[did] = SingularityTable(frame, entries, no_fly)
    return out


def _corridor_ceiling(world: World, dungeon_id: str, x: float, z: float
                      ) -> Optional[float]:
    for conn, _, _ in corridor_halves(world, dungeon_id):
        p = Vec3(x, 0.0, z)
        s = conn.station_of(p)
        if -1e-9 <= s <= conn.length + 1e-9 and \
                abs(conn.lateral_of(p)) <= conn.width_at(s) / 2.0 + 1e-9:
            return conn.ceiling_altitude(s)
    return None


# ---------------------------------------------------------------------------
# Mesh emission


def emit_meshes(world: World) -> tuple[dict[str, MeshBuffer], dict[str, MeshBuffer]]:
    """(deploy, bake) mesh maps.  Bake meshes start as exact copies of their
    deploy counterparts; crease tessellation refines them later without
    touching the deploy set."""
    deploy = {}
    bake = {}
    for elem in sorted_elements(world):
        d = world.meshes[elem.deploy_mesh]
        deploy[d.mesh_id] = d
        b = MeshBuffer(elem.bake_mesh, d.category, d.dungeon,
                       list(d.positions), list(d.normals), list(d.uvs),
                       list(d.indices))
        bake[b.mesh_id] = b
    return deploy, bake


# ---------------------------------------------------------------------------
# Top-level generation


def generate_world(config: WorldConfig) -> World:
    config.validate()
    rng = Stream(config.seed)
    spec_by_id = {s.id: s for s in config.dungeons}

    shapes = {s.id: _footprint_vertices(rng.child("shape", s.id),
                                        s.side_count, s.radius)
              for s in config.dungeons}
    centers, world_fp, placed_conns = _place_dungeons(config, rng, shapes)

    builder = _Builder()
    dungeons: dict[str, Dungeon] = {}
    openings: dict[str, dict[int, list[_Opening]]] = {s.id: {} for s in config.dungeons}

    for spec in config.dungeons:
        fp_xz = world_fp[spec.id]
        cx, cz = centers[spec.id]
        floor = spec.floor_altitude
        sub = rng.child("dungeon", spec.id)
        wall_h = sub.uniform(*config.style.wall_height)
        footprint = ConvexPolygon3(tuple(Vec3(x, floor, z) for x, z in fp_xz))
        ceiling_plane = _make_ceiling(sub, config.style, fp_xz, (cx, cz), floor, wall_h)
        wall_planes = []
        for e in range(len(fp_xz)):
            onx, onz = _edge_outward_normal(fp_xz, e)
            wall_planes.append(Plane.from_point_normal(
                Vec3(fp_xz[e][0], floor, fp_xz[e][1]), Vec3(-onx, 0.0, -onz), "wall"))
        dungeons[spec.id] = Dungeon(
            id=spec.id, name=spec.name, center=Vec3(cx, floor, cz),
            footprint=footprint, floor_altitude=floor, wall_height=wall_h,
            floor_plane=Plane(UP, floor, "floor"), ceiling_plane=ceiling_plane,
            wall_planes=wall_planes, elements=[], connectors=[],
            progression_index=spec.progression_index)

    world = World(seed=config.seed, config=config, dungeons=dungeons,
                  connectors={}, elements=builder.elements, meshes=builder.meshes,
                  lights=[], singularity={})

    # connectors first: they decide the wall openings
    for pc in sorted(placed_conns, key=lambda c: c.index):
        conn_id = f"c{pc.index}:{pc.a}-{pc.b}"
        spec_a, spec_b = spec_by_id[pc.a], spec_by_id[pc.b]
        ow_a, oh_a, ow_b, oh_b = _opening_dims(pc.kind, spec_a, spec_b)
        # openings never breach the lowest point of either ceiling
        cap_a = dungeons[pc.a].min_interior_height() - 0.2
        cap_b = dungeons[pc.b].min_interior_height() - 0.2
        oh_a = min(oh_a, cap_a)
        oh_b = min(oh_b, cap_b)
        oblique = pc.att_a.cos_angle < 0.9999 or pc.att_b.cos_angle < 0.9999
        if oblique:
            # constant cross-section keeps oblique wall carves exact rectangles
            ow_a = ow_b = min(ow_a, ow_b)
            oh_a = oh_b = min(oh_a, oh_b)
        conn = Connector(
            id=conn_id, kind=pc.kind, endpoints=(pc.a, pc.b),
            attach_a=pc.attach_a, attach_b=pc.attach_b, axis=pc.axis,
            length=pc.length, width_a=ow_a, width_b=ow_b,
            height_a=oh_a, height_b=oh_b,
            floor_a=spec_a.floor_altitude, floor_b=spec_b.floor_altitude,
            att_a=pc.att_a, att_b=pc.att_b)
        world.connectors[conn_id] = conn
        dungeons[pc.a].connectors.append(conn_id)
        dungeons[pc.b].connectors.append(conn_id)
        _build_connector_geometry(builder, conn)
        taper = GATE_TAPER if pc.kind == "gate" else 1.0
        for d_id, att, ow, oh, floor in ((pc.a, pc.att_a, ow_a, oh_a, spec_a.floor_altitude),
                                         (pc.b, pc.att_b, ow_b, oh_b, spec_b.floor_altitude)):
            scale = 1.0 / max(att.cos_angle, 0.2)
            openings[d_id].setdefault(att.edge, []).append(_Opening(
                u_center=att.hole_center_u, bottom=floor, top=floor + oh,
                half_w_bottom=ow / 2.0 * scale, half_w_top=ow / 2.0 * scale * taper))

    for spec in config.dungeons:
        dungeon = dungeons[spec.id]
        sub = rng.child("interior", spec.id)
        _build_wall_elements(builder, dungeon, openings[spec.id])
        fl = _polygon_slab_element(builder, f"{spec.id}:floor", "floor", spec.id,
                                   dungeon.footprint, UP, "floor")
        dungeon.elements.append(fl.id)
        ceil_verts = tuple(Vec3(v.x, dungeon.ceiling_y(v.x, v.z), v.z)
                           for v in reversed(dungeon.footprint.vertices))
        ce = _polygon_slab_element(builder, f"{spec.id}:ceiling", "ceiling", spec.id,
                                   ConvexPolygon3(ceil_verts),
                                   dungeon.ceiling_plane.normal, "ceiling")
        dungeon.elements.append(ce.id)
        if spec.has_columns:
            density = spec.column_density if spec.column_density is not None \
                else sub.uniform(*config.style.column_density)
            keep_clear = []
            for conn in world.connectors_of(spec.id):
                p = conn.attach_a if spec.id == conn.endpoints[0] else conn.attach_b
                keep_clear.append((p.x, p.z))
            place_column_formations(dungeon, config.style, sub.child("columns"),
                                    density, keep_clear, builder)
        if spec.has_torches:
            _place_torches(builder, dungeon, sub.child("torches"), openings[spec.id])

    for spec in config.dungeons:
        dungeons[spec.id].height_map = _build_height_map(
            world, dungeons[spec.id], config.style.voxel_size)

    world.lights = place_torch_lights(world)
    world.singularity = build_singularity_tables(world)
    _emit_bake_meshes(world)
    _check_world(world)
    return world


def _emit_bake_meshes(world: World) -> None:
    _, bake = emit_meshes(world)
    world.meshes.update(bake)
    for mesh in world.meshes.values():
        mesh.validate()


def _make_ceiling(rng: Stream, style: GlobalStyle, fp_xz, center, floor, wall_h) -> Plane:
    incline = rng.uniform(*style.ceiling_incline)
    azim = rng.uniform(0.0, 2.0 * math.pi)
    cx, cz = center
    top = Vec3(cx, floor + wall_h, cz)
    for _ in range(16):
        n = Vec3(math.cos(azim) * math.sin(incline), -math.cos(incline),
                 -math.sin(azim) * math.sin(incline))
        plane = Plane.from_point_normal(top, n, "ceiling")
        min_h = min((plane.offset - n.x * x - n.z * z) / n.y - floor
                    for x, z in fp_xz)
        if min_h >= MIN_INTERIOR_HEIGHT:
            return plane
        incline *= 0.5
        if incline < 1e-4:
            break
    return Plane.from_point_normal(top, Vec3(0.0, -1.0, 0.0), "ceiling")


def _check_world(world: World) -> None:
    for conn in world.connectors.values():
        if conn.portal.empty:
            raise WorldGenError(f"{conn.id}: empty portal")
        for v in conn.portal.vertices:
            if abs(signed_distance(v, conn.cross_plane)) > 1e-6:
                raise WorldGenError(f"{conn.id}: portal not on cross plane")
    for elem in world.elements.values():
        if elem.dungeon not in world.dungeons:
            raise WorldGenError(f"{elem.id}: unknown dungeon tag")
    for dungeon in world.dungeons.values():
        fp = dungeon.footprint_xz()
        for eid in dungeon.elements:
            c = world.elements[eid].volume.obb.center
            if not point_in_convex_2d(c.x, c.z, fp, eps=1e-6):
                raise WorldGenError(f"{eid}: volume center outside footprint")
        n = len(dungeon.wall_planes)
        for i in range(n):
            a = dungeon.wall_planes[i].normal
            b = dungeon.wall_planes[(i + 1) % n].normal
            ang = math.degrees(math.acos(max(-1.0, min(1.0, a.dot(b)))))
            if 90.0 - ORTHO_BAND_DEG <= ang <= 90.0 + ORTHO_BAND_DEG:
                raise WorldGenError(f"{dungeon.id}: orthogonal wall pair {i}")
