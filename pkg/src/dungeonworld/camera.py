"""Three-stage tracing camera over the layered occupancy grids.

Stage 1 samples a best-fit position in zones behind the player, stage 2
plans a grid path (A* with octile heuristic, no corner cutting), stage 3
animates along the smoothed path with distance-adaptive speed.  The one
hard rule: the collision sphere never enters solid geometry, so every
position the camera can occupy is vetted against the clearance mask and the
element volumes, and unreachable targets leave the rig holding in place.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

from .geometry import Sphere, TriangleIndex, Vec3, sphere_intersects_volume
from .metastore import MetaStore
from .voxelizer import Cell, LayeredGrid, cell_of, clearance_mask, line_of_sight, world_of

SQRT2 = math.sqrt(2.0)


@dataclass
class CameraConfig:
    altitude_offset: float = 1.8
    desired_distance: float = 5.0
    down_angle: float = 0.35
    fov: float = 1.15
    aspect: float = 16.0 / 9.0
    collision_radius: float = 0.45
    r_min: float = 2.6
    r_max: float = 7.5
    zone_count: int = 5
    radii_count: int = 4
    altitude_count: int = 3
    d_min: float = 2.2
    d_max: float = 9.0
    base_speed: float = 6.0
    zone_step: float = 2.0 * math.pi / 5.0   # zones tile the circle around the player
    w_alignment: float = 0.5
    w_clearance: float = 0.3
    w_distance: float = 0.2

    def __post_init__(self) -> None:
        if not (0.0 < self.r_min < self.r_max):
            raise ValueError("need 0 < r_min < r_max")
        if not (self.d_min < self.desired_distance < self.d_max):
            raise ValueError("need d_min < desired_distance < d_max")

    # wire-protocol camera tweaks use short names
    _ALIASES = {"altitude": "altitude_offset", "distance": "desired_distance"}

    def merged(self, overrides: dict) -> "CameraConfig":
        vals = dict(self.__dict__)
        for key, value in overrides.items():
            if value is None:
                continue
            field_name = self._ALIASES.get(key, key)
            if field_name not in vals:
                raise ValueError(f"unknown camera setting {key!r}")
            vals[field_name] = value
        return CameraConfig(**vals)


@dataclass
class CameraRig:
    position: Optional[Vec3] = None
    look_target: Optional[Vec3] = None
    phase: str = "idle"                # idle | animating
    path: list[Vec3] = field(default_factory=list)
    path_index: int = 0
    speed: float = 0.0
    retrigger: bool = False
    saturated: bool = False
    zone_widen: float = 1.0            # widening factor after failed plans


@dataclass
class GridPath:
    cells: list[Cell]
    cost: float


class CameraWorld:
    """Bundle of immutable planning artifacts the camera consumes."""

    def __init__(self, store: MetaStore, grid: LayeredGrid,
                 radius: float, tri_index: Optional[TriangleIndex] = None):
        self.store = store
        self.grid = grid
        self.radius = radius
        self.mask = clearance_mask(grid, radius)
        self.tri_index = tri_index
        self._volumes = [e.volume for _, e in sorted(store.world.elements.items())]

    def navigable(self, cell: Optional[Cell]) -> bool:
        if cell is None or not self.grid.in_bounds(cell):
            return False
        return self.mask[cell.layer][cell.iz * self.grid.frame.nx + cell.ix] != 0

    def sphere_clear(self, p: Vec3) -> bool:
        s = Sphere(p, self.radius)
        for vol in self._volumes:
            if sphere_intersects_volume(s, vol):
                return False
        return True

    def los_blocked(self, a: Vec3, b: Vec3) -> bool:
        if self.tri_index is None:
            return False
        d = b.sub(a)
        n = d.norm()
        if n < 1e-9:
            return False
        hit = self.tri_index.cast(a, d.scale(1.0 / n), max_t=n - 1e-3)
        return hit is not None

    def clearance_estimate(self, p: Vec3) -> float:
        best = math.inf
        for vol in self._volumes:
            d = p.dist(vol.sphere.center) - vol.sphere.radius
            if d < best:
                best = d
        return max(0.0, best)


# ---------------------------------------------------------------------------
# Stage 2: grid planning


def astar(grid: LayeredGrid, start: Cell, goal: Cell,
          mask: Optional[list[bytearray]] = None) -> Optional[GridPath]:
    """Octile A* over the layered grid.

    Costs: orthogonal 1, diagonal sqrt(2), vertical layer step = slab/voxel.
    Diagonals never cut corners past a blocked orthogonal neighbor.  Ties
    break on lower heuristic, then smaller (layer, ix, iz).
    """
    nx = grid.frame.nx

    def blocked(c: Cell) -> bool:
        if not grid.in_bounds(c):
            return True
        if mask is not None:
            return mask[c.layer][c.iz * nx + c.ix] == 0
        return grid.is_solid(c)

    if blocked(start) or blocked(goal):
        return None
    v_cost = grid.slab_thickness() / grid.voxel_size

    def h(c: Cell) -> float:
        dx = abs(c.ix - goal.ix)
        dz = abs(c.iz - goal.iz)
        octile = max(dx, dz) + (SQRT2 - 1.0) * min(dx, dz)
        return octile + v_cost * abs(c.layer - goal.layer)

    open_heap: list[tuple[float, float, Cell]] = [(h(start), h(start), start)]
    g_score: dict[Cell, float] = {start: 0.0}
    came: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    while open_heap:
        _, _, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        if cur == goal:
            cells = [cur]
            while cur in came:
                cur = came[cur]
                cells.append(cur)
            cells.reverse()
            return GridPath(cells, g_score[goal])
        closed.add(cur)
        base = g_score[cur]
        for dx, dz, cost in ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
                             (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2)):
            nxt = Cell(cur.layer, cur.ix + dx, cur.iz + dz)
            if blocked(nxt):
                continue
            if dx != 0 and dz != 0:
                if blocked(Cell(cur.layer, cur.ix + dx, cur.iz)) or \
                        blocked(Cell(cur.layer, cur.ix, cur.iz + dz)):
                    continue
            ng = base + cost
            if ng < g_score.get(nxt, math.inf) - 1e-12:
                g_score[nxt] = ng
                came[nxt] = cur
                hh = h(nxt)
                heapq.heappush(open_heap, (ng + hh, hh, nxt))
        for dl in (-1, 1):
            nxt = Cell(cur.layer + dl, cur.ix, cur.iz)
            if blocked(nxt):
                continue
            ng = base + v_cost
            if ng < g_score.get(nxt, math.inf) - 1e-12:
                g_score[nxt] = ng
                came[nxt] = cur
                hh = h(nxt)
                heapq.heappush(open_heap, (ng + hh, hh, nxt))
    return None


def smooth_path(path: GridPath, grid: LayeredGrid,
                mask: Optional[list[bytearray]] = None) -> list[Vec3]:
    """Shortcutting + one corner-rounding pass, in world coordinates.

    Shortcuts only within same-layer runs (vertical steps are kept verbatim);
    every rounded corner is re-verified for line of sight and reverted
    locally when the cut would graze a blocked cell.
    """
    cells = path.cells
    if len(cells) <= 1:
        return [world_of(grid, c) for c in cells]

    kept: list[Cell] = [cells[0]]
    i = 0
    while i < len(cells) - 1:
        j = len(cells) - 1
        while j > i + 1:
            if cells[j].layer == cells[i].layer and \
                    all(cells[k].layer == cells[i].layer for k in range(i, j + 1)) and \
                    line_of_sight(grid, cells[i], cells[j], mask):
                break
            j -= 1
        kept.append(cells[j])
        i = j

    pts = [world_of(grid, c) for c in kept]
    if len(pts) <= 2:
        return pts

    def cell_at(p: Vec3) -> Optional[Cell]:
        return cell_of(grid, p)

    def seg_clear(a: Vec3, b: Vec3) -> bool:
        ca, cb = cell_at(a), cell_at(b)
        if ca is None or cb is None or ca.layer != cb.layer:
            return False
        return line_of_sight(grid, ca, cb, mask)

    rounded: list[Vec3] = [pts[0]]
    for k in range(1, len(pts) - 1):
        prev, cur, nxt = pts[k - 1], pts[k], pts[k + 1]
        if prev.y != cur.y or cur.y != nxt.y:
            rounded.append(cur)   # never round across layer steps
            continue
        p1 = prev.lerp(cur, 0.75)
        p2 = cur.lerp(nxt, 0.25)
        c1, c2 = cell_at(p1), cell_at(p2)
        ok = (c1 is not None and c2 is not None
              and (mask is None or (grid.in_bounds(c1) and grid.in_bounds(c2)
                                    and mask[c1.layer][c1.iz * grid.frame.nx + c1.ix]
                                    and mask[c2.layer][c2.iz * grid.frame.nx + c2.ix]))
              and seg_clear(p1, p2))
        if ok:
            rounded.extend((p1, p2))
        else:
            rounded.append(cur)
    rounded.append(pts[-1])
    return rounded


# ---------------------------------------------------------------------------
# Stage 1: position sampling


def sample_best_position(player_pos: Vec3, player_heading: Vec3,
                         config: CameraConfig, cam: CameraWorld,
                         widen: float = 1.0) -> tuple[Optional[Vec3], bool]:
    """Best scoring collision-free spot behind the player.

    Zones fan out symmetrically from the behind direction; candidates are
    rejected unless their cell is navigable, their collision sphere clears
    every element volume, and the sight line to the player head is free.
    Returns (position, saturated); saturated means nothing was accepted.
    """
    behind = Vec3(-player_heading.x, 0.0, -player_heading.z)
    n = behind.norm()
    behind = Vec3(-1.0, 0.0, 0.0) if n < 1e-9 else behind.scale(1.0 / n)
    base_az = math.atan2(-behind.z, behind.x)

    offsets = [0.0]
    for k in range(1, config.zone_count):
        mag = ((k + 1) // 2) * config.zone_step * widen
        offsets.append(mag if k % 2 == 1 else -mag)

    alts = cam.grid.layer_altitudes()
    want_y = player_pos.y + config.altitude_offset
    order = sorted(range(1, len(alts) - 1), key=lambda i: (abs(alts[i] - want_y), i))
    alt_pick = [alts[i] for i in order[:config.altitude_count]]

    radii = [config.r_min + (config.r_max - config.r_min) * i / max(config.radii_count - 1, 1)
             for i in range(config.radii_count)]
    head = Vec3(player_pos.x, player_pos.y + 1.6, player_pos.z)

    best: Optional[tuple[float, int, Vec3]] = None
    index = 0
    for az_off in offsets:
        az = base_az + az_off
        d = Vec3(math.cos(az), 0.0, -math.sin(az))
        for alt in alt_pick:
            for r in radii:
                index += 1
                pos = Vec3(player_pos.x + d.x * r, alt, player_pos.z + d.z * r)
                cell = cell_of(cam.grid, pos)
                if not cam.navigable(cell):
                    continue
                if not cam.sphere_clear(pos):
                    continue
                if cam.los_blocked(pos, head):
                    continue
                to_cam = Vec3(pos.x - player_pos.x, 0.0, pos.z - player_pos.z)
                nn = to_cam.norm()
                alignment = to_cam.scale(1.0 / nn).dot(behind) if nn > 1e-9 else 0.0
                clearance = min(cam.clearance_estimate(pos), config.r_max) / config.r_max
                dist = pos.dist(player_pos)
                closeness = max(0.0, 1.0 - abs(dist - config.desired_distance)
                                / config.desired_distance)
                score = (config.w_alignment * alignment
                         + config.w_clearance * clearance
                         + config.w_distance * closeness)
                if best is None or score > best[0] + 1e-12:
                    best = (score, index, pos)
    if best is None:
        return None, True
    return best[2], False


# ---------------------------------------------------------------------------
# Stage 3: animation


def animate_step(rig: CameraRig, player_pos: Vec3, config: CameraConfig,
                 dt: float) -> CameraRig:
    """Advance along the active path with distance-adaptive speed."""
    if dt <= 0.0 or rig.position is None:
        return rig
    head = Vec3(player_pos.x, player_pos.y + 1.6, player_pos.z)
    rig.look_target = head
    dist = rig.position.dist(player_pos)
    if rig.phase == "animating":
        rig.speed = config.base_speed * min(3.0, max(0.5, dist / config.desired_distance))
        travel = rig.speed * dt
        while travel > 0.0 and rig.path_index < len(rig.path):
            target = rig.path[rig.path_index]
            gap = rig.position.dist(target)
            if gap <= travel + 1e-9:
                rig.position = target
                travel -= gap
                rig.path_index += 1
            else:
                rig.position = rig.position.lerp(target, travel / gap)
                travel = 0.0
        if rig.path_index >= len(rig.path):
            rig.phase = "idle"
            rig.path = []
            rig.path_index = 0
    if not (config.d_min <= dist <= config.d_max):
        rig.retrigger = True
    return rig


# ---------------------------------------------------------------------------
# Orchestration


def update_camera(rig: CameraRig, player_pos: Vec3, player_heading: Vec3,
                  config: CameraConfig, cam: CameraWorld, dt: float) -> CameraRig:
    """Run the three phases for one tick.

    Phase 1 (sampling) only fires when idle or retriggered; a failed plan
    keeps the rig in place and widens the zone fan for the next attempt
    (the camera never teleports through geometry)."""
    if rig.position is None:
        pos, saturated = sample_best_position(player_pos, player_heading, config, cam)
        rig.saturated = saturated
        if pos is not None:
            rig.position = pos
            rig.look_target = Vec3(player_pos.x, player_pos.y + 1.6, player_pos.z)
        return rig

    if rig.phase == "idle" or rig.retrigger:
        rig.retrigger = False
        pos, saturated = sample_best_position(player_pos, player_heading, config, cam,
                                              widen=rig.zone_widen)
        rig.saturated = saturated
        if pos is not None and pos.dist(rig.position) > 0.25:
            start = cell_of(cam.grid, rig.position)
            goal = cell_of(cam.grid, pos)
            planned = None
            if start is not None and goal is not None:
                planned = astar(cam.grid, start, goal, cam.mask)
            if planned is None:
                rig.zone_widen = min(2.5, rig.zone_widen * 1.3)
            else:
                rig.zone_widen = 1.0
                waypoints = smooth_path(planned, cam.grid, cam.mask)
                if waypoints and waypoints[-1].dist(pos) > 1e-9:
                    waypoints.append(pos)
                rig.path = waypoints
                rig.path_index = 0
                rig.phase = "animating"
    return animate_step(rig, player_pos, config, dt)
