"""Species-specific motion control, driven entirely through metadata queries.

Bats pursue with turn-rate limits, hold an altitude band over the height
map and flip-turn when the front wall is too close while both sides give no
room.  Scorpions crawl on floor/step/base/transition planes with balanced
up-vector turns and mutual separation.  The serpent weaves a sinusoid with
its head and drags its segment chain down the recorded head path at exact
arc spacing, steering by heading constraints and a nearest-solid distance
field.  Player motion is validated against walls (slide) and columns
(deterministic tangential deflection).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .geometry import Sphere, Vec3, sphere_intersects_volume
from .metastore import MetaStore, UnresolvedPositionError
from .voxelizer import Cell, LayeredGrid
from .worldgen import CONSTRAIN_LEFT, CONSTRAIN_RIGHT, FORBIDDEN, Connector

AGENT_KINDS = ("bat", "scorpion", "serpent_head", "mummy", "player")

DECISIONS = ("advance", "turn_left", "turn_right", "flip_turn", "hold", "attack", "land")


@dataclass
class MotionDecision:
    kind: str
    magnitude: float = 0.0


@dataclass
class AgentState:
    id: str
    kind: str
    position: Vec3
    heading: Vec3
    up: Vec3 = Vec3(0.0, 1.0, 0.0)
    speed: float = 0.0
    dungeon: Optional[str] = None
    mode: str = "idle"
    flip_progress: float = -1.0        # >= 0 while a flip turn is running


@dataclass
class BatParams:
    d_front: float = 1.35              # 3 voxel sizes at the 0.45 default
    d_side: float = 0.9                # 2 voxel sizes
    altitude_band: tuple[float, float] = (1.5, 2.5)
    turn_rate: float = 2.8             # rad/s
    attack_range: float = 1.4
    speed: float = 3.2
    flip_duration: float = 0.6
    radius: float = 0.35

    def __post_init__(self) -> None:
        if self.d_front <= 0 or self.d_side <= 0:
            raise ValueError("wall trigger distances must be positive")


@dataclass
class ScorpionParams:
    speed: float = 1.4
    turn_rate: float = 2.2
    up_rate: float = 4.0               # up-vector convergence rate
    body_offset: float = 0.22
    r_sep: float = 0.9                 # 1.5 body radii
    sting_range: float = 1.1
    radius: float = 0.45


@dataclass
class SerpentParams:
    segments: int = 12
    link_length: float = 0.8
    amplitude: float = 0.45
    wavelength: float = 5.0
    speed: float = 2.4
    turn_rate: float = 1.8
    min_clearance: float = 0.9         # voxels-distance to nearest solid, in world units
    body_offset: float = 0.35
    radius: float = 0.4


@dataclass
class SerpentState:
    head: AgentState
    params: SerpentParams
    segment_poses: list[tuple[Vec3, Vec3]] = field(default_factory=list)
    history: deque = field(default_factory=lambda: deque(maxlen=4096))
    arc: float = 0.0                   # total arc length travelled by the head
    base_heading: Optional[Vec3] = None  # path direction without the weave

    def __post_init__(self) -> None:
        if self.base_heading is None:
            self.base_heading = self.head.heading
        if not self.history:
            self.history.append((0.0, self.head.position))
        if not self.segment_poses:
            back = self.head.heading.scale(-1.0)
            self.segment_poses = [
                (self.head.position.add(back.scale((i + 1) * self.params.link_length)),
                 self.head.heading)
                for i in range(self.params.segments)]


def _horizontal(v: Vec3) -> Vec3:
    h = Vec3(v.x, 0.0, v.z)
    n = h.norm()
    return Vec3(1.0, 0.0, 0.0) if n < 1e-9 else h.scale(1.0 / n)


def position_clear(store: MetaStore, dungeon_id: str, pos: Vec3, radius: float,
                   categories: tuple[str, ...] = ("column", "torch")) -> bool:
    """Exact sphere check against solid interior elements of one dungeon."""
    s = Sphere(pos, radius)
    for elem in store.elements_of(dungeon_id):
        if elem.category in categories and sphere_intersects_volume(s, elem.volume):
            return False
    return True


def _rotate_y(v: Vec3, ang: float) -> Vec3:
    c, s = math.cos(ang), math.sin(ang)
    return Vec3(v.x * c + v.z * s, v.y, -v.x * s + v.z * c)


def _turn_toward(heading: Vec3, target: Vec3, max_step: float) -> tuple[Vec3, float]:
    """Rotate heading about +y toward target by at most max_step radians.
    Returns (new heading, signed step); positive steps turn left (ccw)."""
    a0 = math.atan2(-heading.z, heading.x)
    a1 = math.atan2(-target.z, target.x)
    delta = (a1 - a0 + math.pi) % (2.0 * math.pi) - math.pi
    step = max(-max_step, min(max_step, delta))
    return _rotate_y(heading, -step), step


def heading_azimuth(heading: Vec3) -> float:
    return math.atan2(-heading.z, heading.x)


# ---------------------------------------------------------------------------
# Bat


def bat_three_distance_rule(front: float, left: float, right: float,
                            params: BatParams) -> bool:
    """Fig-style trigger: front wall too close and neither side gives room."""
    return front < params.d_front and left < params.d_side and right < params.d_side


def bat_update(state: AgentState, player_pos: Vec3, store: MetaStore,
               params: BatParams, dt: float) -> tuple[AgentState, MotionDecision]:
    did = store.dungeon_of_point(state.position)
    if did is None:
        raise UnresolvedPositionError(f"bat {state.id} outside all dungeons")
    state.dungeon = did

    # flip turn in progress: rotate in place, then re-check forward room
    if state.flip_progress >= 0.0:
        step = math.pi * dt / params.flip_duration
        remaining = math.pi - state.flip_progress
        step = min(step, remaining)
        state.heading = _rotate_y(state.heading, step)
        state.flip_progress += step
        if state.flip_progress >= math.pi - 1e-9:
            state.flip_progress = -1.0
            front = store.directed_clearance(state.position, state.heading, did, {"wall"})
            state.mode = "attack" if front > params.d_front else "pursue"
        return state, MotionDecision("flip_turn", step)

    front = store.directed_clearance(state.position, state.heading, did, {"wall"})
    left_dir = Vec3(state.heading.z, 0.0, -state.heading.x)
    left = store.directed_clearance(state.position, left_dir, did, {"wall"})
    right = store.directed_clearance(state.position, left_dir.scale(-1.0), did, {"wall"})

    if bat_three_distance_rule(front, left, right, params):
        state.flip_progress = 0.0
        state.mode = "flip"
        return state, MotionDecision("flip_turn", 0.0)

    to_player = _horizontal(player_pos.sub(state.position))
    new_heading, step = _turn_toward(_horizontal(state.heading), to_player,
                                     params.turn_rate * dt)
    constraint = store.heading_constraint_vec(did, state.position,
                                              new_heading.x, new_heading.z)
    decision = MotionDecision("advance", params.speed * dt)
    if constraint == FORBIDDEN:
        # keep turning but do not advance into the obstruction
        state.heading = new_heading
        return state, MotionDecision("hold", 0.0)
    if constraint == CONSTRAIN_LEFT and step < 0.0:
        new_heading, _ = _turn_toward(_horizontal(state.heading),
                                      _rotate_y(state.heading, params.turn_rate * dt),
                                      params.turn_rate * dt)
        decision = MotionDecision("turn_left", params.turn_rate * dt)
    elif constraint == CONSTRAIN_RIGHT and step > 0.0:
        new_heading, _ = _turn_toward(_horizontal(state.heading),
                                      _rotate_y(state.heading, -params.turn_rate * dt),
                                      params.turn_rate * dt)
        decision = MotionDecision("turn_right", params.turn_rate * dt)
    state.heading = new_heading

    dist = state.position.dist(player_pos)
    if dist <= params.attack_range:
        state.mode = "attack"
        return state, MotionDecision("attack", 0.0)
    state.mode = "pursue"

    advance = min(params.speed * dt, max(0.0, front - params.radius - 0.05))
    pos = _bat_advance(state, store, did, params, advance)
    support = store.height_at(did, pos.x, pos.z)
    if support is not None:
        lo = support + params.altitude_band[0]
        hi = support + params.altitude_band[1]
        target_y = (lo + hi) / 2.0
        dy = max(-2.0 * dt, min(2.0 * dt, target_y - pos.y))
        pos = Vec3(pos.x, min(hi, max(lo, pos.y + dy)), pos.z)
    if store.dungeon_of_point(pos) is not None and \
            position_clear(store, did, pos, params.radius):
        state.position = pos
        state.dungeon = store.dungeon_of_point(pos)
    return state, decision


def _bat_advance(state: AgentState, store: MetaStore, did: str,
                 params: BatParams, advance: float) -> Vec3:
    """Advance along the heading, swerving off columns when the straight
    step would clip one; a fully blocked bat stays put."""
    for az in (0.0, 0.6, -0.6, 1.2, -1.2):
        h = _rotate_y(state.heading, az) if az else state.heading
        pos = state.position.add(h.scale(advance))
        if position_clear(store, did, pos, params.radius):
            if az:
                state.heading = h
            return pos
    return state.position


def bat_gate_transition(state: AgentState, conn: Connector,
                        store: MetaStore,
                        params: Optional[BatParams] = None
                        ) -> Optional[list[tuple[Vec3, Vec3]]]:
    """Precomputed (position, heading) waypoints through a gate or door.

    Approach parallel to the wall at flight altitude, descend to the opening
    center while side-turning 90 degrees, cross the portal along its axis
    and mirror the ascent on the far side."""
    if conn.kind not in ("gate", "door"):
        return None
    params = params or BatParams()
    if state.dungeon == conn.endpoints[0]:
        near_floor, far_floor = conn.floor_a, conn.floor_b
        axis = conn.axis
        s_near, s_far = 0.0, conn.length
    elif state.dungeon == conn.endpoints[1]:
        near_floor, far_floor = conn.floor_b, conn.floor_a
        axis = conn.axis.scale(-1.0)
        s_near, s_far = conn.length, 0.0
    else:
        return None
    lat = Vec3(axis.z, 0.0, -axis.x)  # 90 degrees left of travel
    base = conn.attach_a

    def at(s: float, w: float, y: float) -> Vec3:
        p = base.add(conn.axis.scale(s)).add(conn.lateral().scale(w))
        return Vec3(p.x, y, p.z)

    gate_alt = (conn.support_altitude(conn.length / 2.0)
                + conn.ceiling_altitude(conn.length / 2.0)) / 2.0
    fly_alt = near_floor + sum(params.altitude_band) / 2.0
    approach_w = conn.width_at(s_near) / 2.0 + 1.6

    side = 1.0 if lat.dot(conn.lateral()) >= 0 else -1.0
    near: list[tuple[Vec3, Vec3]] = []
    # parallel to the wall, closing on the opening axis
    for w in (approach_w, approach_w * 0.6):
        near.append((at(s_near - axis.dot(conn.axis) * 1.6,
                        side * w, fly_alt), lat.scale(-side)))
    # descending quarter turn into the opening center
    k_steps = 4
    for k in range(1, k_steps + 1):
        t = k / (k_steps + 1.0)
        ang = (1.0 - t) * (math.pi / 2.0)
        h = _rotate_y(axis, -side * ang) if side > 0 else _rotate_y(axis, ang)
        w = side * approach_w * 0.6 * (1.0 - t)
        y = fly_alt + (gate_alt - fly_alt) * t
        s = s_near - axis.dot(conn.axis) * 1.6 * (1.0 - t)
        near.append((at(s, w, y), h))
    mid = (at(conn.length / 2.0, 0.0, gate_alt), axis)

    # mirror the near half across the cross plane for the far half
    far: list[tuple[Vec3, Vec3]] = []
    mid_point = at(conn.length / 2.0, 0.0, gate_alt)
    far_fly = far_floor + sum(params.altitude_band) / 2.0
    for pos, h in reversed(near):
        s_rel = conn.station_of(pos) - conn.length / 2.0
        lat_rel = conn.lateral_of(pos)
        y_rel = pos.y - near_floor
        mp = base.add(conn.axis.scale(conn.length / 2.0 - s_rel)) \
            .add(conn.lateral().scale(lat_rel))
        h_ref = h.sub(conn.axis.scale(2.0 * h.dot(conn.axis)))
        far.append((Vec3(mp.x, far_floor + y_rel, mp.z), h_ref.scale(-1.0)))
    return near + [mid] + far


# ---------------------------------------------------------------------------
# Scorpion


def scorpion_update(state: AgentState, player_pos: Vec3,
                    others: list[AgentState], store: MetaStore,
                    params: ScorpionParams, dt: float) -> AgentState:
    did = store.dungeon_of_point(state.position)
    if did is None:
        raise UnresolvedPositionError(f"scorpion {state.id} outside all dungeons")
    state.dungeon = did

    found = store.nearest_plane(state.position, did,
                                {"floor", "step", "base", "transition"})
    if found is None:
        state.mode = "hold"
        raise UnresolvedPositionError(f"scorpion {state.id}: no support plane")
    plane, _ = found

    # balanced turn: slerp the up vector toward the support normal
    t = min(1.0, params.up_rate * dt)
    target = plane.normal if plane.normal.y > 0 else plane.normal.scale(-1.0)
    dot = max(-1.0, min(1.0, state.up.dot(target)))
    ang = math.acos(dot)
    if ang < 1e-9:
        state.up = target
    else:
        f = t
        s0 = math.sin((1 - f) * ang) / math.sin(ang)
        s1 = math.sin(f * ang) / math.sin(ang)
        state.up = state.up.scale(s0).add(target.scale(s1)).normalized()

    # separation from the other scorpions: inside r_sep it overrides pursuit
    steer = Vec3(0.0, 0.0, 0.0)
    for other in others:
        if other.id == state.id or other.kind != "scorpion":
            continue
        away = state.position.sub(other.position)
        d = away.norm()
        if d < 1e-9:
            away = Vec3(1.0, 0.0, 0.0) if state.id < other.id else Vec3(-1.0, 0.0, 0.0)
            d = 1e-3
        reach = params.r_sep * 1.2  # hysteresis: push a little past the hard radius
        if d < reach:
            steer = steer.add(_horizontal(away).scale((reach - d) / reach))

    to_player = _horizontal(player_pos.sub(state.position))
    separating = steer.norm() > 1e-9
    desired = _horizontal(steer) if separating else to_player
    rate = params.turn_rate * (3.0 if separating else 1.0)
    state.heading, _ = _turn_toward(_horizontal(state.heading), desired, rate * dt)

    dist = state.position.dist(player_pos)
    state.mode = "attack" if dist <= params.sting_range else "crawl"
    advance = params.speed * dt if state.mode == "crawl" else 0.0
    if separating:
        # push apart directly; heading-rate steering alone lets a coincident
        # pair chase each other in lockstep forever
        disp = _horizontal(steer).scale(params.speed * dt)
    else:
        disp = state.heading.scale(advance)
    disp = validate_ground_motion(state.position, disp, store, did, params.radius)
    pos = state.position.add(disp)

    support = store.height_at(did, pos.x, pos.z)
    if support is not None:
        pos = Vec3(pos.x, support + params.body_offset, pos.z)
    if store.dungeon_of_point(pos) is not None:
        state.position = pos
        state.dungeon = store.dungeon_of_point(pos)
    return state


# ---------------------------------------------------------------------------
# Serpent


def build_distance_field(grid: LayeredGrid, layer: Optional[int] = None
                         ) -> list[float]:
    """Nearest-solid-cell distance (world units) over one layer, by BFS from
    every solid cell (the middle in-band layer by default)."""
    if layer is None:
        layer = grid.layer_count // 2
    nx, nz = grid.frame.nx, grid.frame.nz
    dist = [math.inf] * (nx * nz)
    queue: deque[tuple[int, int]] = deque()
    for iz in range(nz):
        for ix in range(nx):
            if grid.is_solid(Cell(layer, ix, iz)):
                dist[iz * nx + ix] = 0.0
                queue.append((ix, iz))
    while queue:
        ix, iz = queue.popleft()
        base = dist[iz * nx + ix]
        for dx, dz in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            jx, jz = ix + dx, iz + dz
            if 0 <= jx < nx and 0 <= jz < nz and dist[jz * nx + jx] > base + 1.0:
                dist[jz * nx + jx] = base + 1.0
                queue.append((jx, jz))
    return [d * grid.voxel_size for d in dist]


class SerpentBrain:
    """Holds the per-dungeon distance fields the serpent steers by."""

    def __init__(self, grids: dict[str, LayeredGrid]):
        self.grids = grids
        self.fields = {did: build_distance_field(g) for did, g in sorted(grids.items())}

    def clearance(self, did: str, p: Vec3) -> float:
        grid = self.grids[did]
        cell = grid.frame.cell_of(p.x, p.z)
        if cell is None:
            return 0.0
        return self.fields[did][cell[1] * grid.frame.nx + cell[0]]


def serpent_update(sstate: SerpentState, player_pos: Vec3, store: MetaStore,
                   brain: SerpentBrain, dt: float) -> SerpentState:
    head = sstate.head
    params = sstate.params
    did = store.dungeon_of_point(head.position)
    if did is None:
        head.mode = "hold"
        return sstate
    head.dungeon = did

    toward = _horizontal(player_pos.sub(head.position))
    away = toward.scale(-1.0)
    current = _horizontal(sstate.base_heading)
    base = [toward, current, away] if head.mode != "flee" else [away, current]
    candidates = []
    for cand in base:
        candidates.append(cand)
        candidates.append(_rotate_y(cand, 0.7))
        candidates.append(_rotate_y(cand, -0.7))
    margin = params.radius + 0.15
    chosen = None
    for cand in candidates:
        probe = head.position.add(cand.scale(max(1.2, params.speed * dt * 4)))
        if store.heading_constraint_vec(did, head.position, cand.x, cand.z) == FORBIDDEN:
            continue
        if did in brain.grids and brain.clearance(did, probe) < params.min_clearance:
            continue
        if not position_clear(store, did, probe, margin):
            continue
        chosen = cand
        break
    if chosen is None:
        chosen = current
        advance = 0.0
        head.mode = "hold"
    else:
        advance = params.speed * dt
        head.mode = "pursue"

    base_heading, _ = _turn_toward(current, chosen, params.turn_rate * dt)
    sstate.base_heading = base_heading
    # lateral weave: the head itself rides the sinusoid so the chain spacing
    # stays exact when segments resample the recorded path
    s0 = sstate.arc
    s1 = s0 + advance
    two_pi = 2.0 * math.pi
    off0 = params.amplitude * math.sin(two_pi * s0 / params.wavelength)
    off1 = params.amplitude * math.sin(two_pi * s1 / params.wavelength)
    perp = Vec3(base_heading.z, 0.0, -base_heading.x)
    delta = base_heading.scale(advance).add(perp.scale(off1 - off0))
    pos = head.position.add(delta)
    support = store.height_at(did, pos.x, pos.z)
    if support is not None:
        pos = Vec3(pos.x, support + params.body_offset, pos.z)
    if store.dungeon_of_point(pos) is None or \
            not position_clear(store, did, pos, params.radius + 0.05):
        head.mode = "hold"
        return sstate
    step = pos.dist(head.position)
    head.heading = _horizontal(delta) if delta.norm() > 1e-9 else base_heading
    head.position = pos
    head.dungeon = store.dungeon_of_point(pos)
    sstate.arc = s1
    if step > 1e-12:
        sstate.history.append((sstate.history[-1][0] + step, pos))
    resample_segments(sstate)
    return sstate


def resample_segments(sstate: SerpentState) -> None:
    """Chain segments down the recorded head path at exact euclidean spacing.

    Each segment sits where a sphere of radius link_length around the
    previous one first meets the history polyline walking backward, so
    consecutive gaps equal the link length even through turns."""
    params = sstate.params
    hist = sstate.history
    link = params.link_length
    poses: list[tuple[Vec3, Vec3]] = []
    anchor = sstate.head.position
    idx = len(hist) - 1
    for _ in range(params.segments):
        found = None
        j = idx
        while j > 0:
            newer = hist[j][1]
            older = hist[j - 1][1]
            d_new = newer.dist(anchor)
            d_old = older.dist(anchor)
            if d_new <= link <= d_old:
                e = older.sub(newer)
                d0 = newer.sub(anchor)
                aa = e.dot(e)
                bb = 2.0 * d0.dot(e)
                cc = d0.dot(d0) - link * link
                disc = bb * bb - 4.0 * aa * cc
                f = 0.0
                if aa > 1e-15 and disc >= 0.0:
                    f = (-bb + math.sqrt(disc)) / (2.0 * aa)
                    f = min(1.0, max(0.0, f))
                found = (j, newer.lerp(older, f), newer.sub(older))
                break
            j -= 1
        if found is None:
            # path too short: extend straight back from the oldest point
            tail_dir = _horizontal(hist[0][1].sub(hist[min(1, len(hist) - 1)][1])) \
                if len(hist) > 1 else sstate.head.heading.scale(-1.0)
            p = anchor.add(_horizontal(tail_dir).scale(link)) \
                if tail_dir.norm() > 1e-9 else anchor
            poses.append((p, sstate.head.heading))
            anchor = p
            continue
        idx, p, back = found
        hdg = _horizontal(back.scale(-1.0)) if back.norm() > 1e-9 \
            else sstate.head.heading
        poses.append((p, hdg))
        anchor = p
    sstate.segment_poses = poses
    # prune history beyond the body length (plus slack) to bound memory
    need = (params.segments + 2) * link + 2.0
    total = hist[-1][0]
    while len(hist) > 2 and total - hist[1][0] > need:
        hist.popleft()


# ---------------------------------------------------------------------------
# Player motion validation and landing


def validate_ground_motion(pos: Vec3, disp: Vec3, store: MetaStore,
                           dungeon_id: str, radius: float) -> Vec3:
    """Wall slide + column deflection shared by the player and scorpions."""
    out = disp
    for _ in range(3):
        out = _slide_walls(pos, out, store, dungeon_id, radius)
        deflected = _deflect_columns(pos, out, store, dungeon_id, radius)
        if deflected is out:
            break
        out = deflected
    out = _slide_walls(pos, out, store, dungeon_id, radius)
    end = pos.add(out)
    for elem in store.elements_of(dungeon_id):
        if elem.category in ("column", "torch", "door") and \
                elem.volume.contains_point(end):
            return Vec3(0.0, 0.0, 0.0)
    return out


def validate_player_motion(state: AgentState, disp: Vec3,
                           store: MetaStore, radius: float = 0.35) -> Vec3:
    did = store.dungeon_of_point(state.position)
    if did is None:
        raise UnresolvedPositionError(f"player outside all dungeons")
    return validate_ground_motion(state.position, disp, store, did, radius)


def _slide_walls(pos: Vec3, disp: Vec3, store: MetaStore, dungeon_id: str,
                 radius: float) -> Vec3:
    from .voxelizer import aperture_contains
    out = disp
    # carve openings let agents through: a wall plane stops constraining once
    # the end point sits inside a connector aperture silhouette (which extends
    # through the wall plane), shrunk by the agent radius to clear the jambs
    world = store.world
    conns = world.connectors_of(dungeon_id)
    for _ in range(6):
        end = pos.add(out)
        # probe at torso height: ground agents stand exactly on the support
        probe = Vec3(end.x, end.y + 0.6, end.z)
        if any(aperture_contains(c, probe, shrink=radius) for c in conns):
            return out
        worst = None
        for plane in store._planes[dungeon_id]:
            if plane.role != "wall":
                continue
            d_end = plane.normal.dot(end) - plane.offset
            moving_in = out.dot(plane.normal) < -1e-12
            if d_end < radius - 1e-12 and moving_in:
                if worst is None or d_end < worst[0]:
                    worst = (d_end, plane)
        if worst is None:
            return out
        plane = worst[1]
        out = out.sub(plane.normal.scale(out.dot(plane.normal)))
        d_start = plane.normal.dot(pos) - plane.offset
        if d_start < radius - 1e-9:
            out = out.add(plane.normal.scale(radius - d_start))
    return out


def _deflect_columns(pos: Vec3, disp: Vec3, store: MetaStore, dungeon_id: str,
                     radius: float) -> Vec3:
    end = pos.add(disp)
    for elem in store.elements_of(dungeon_id):
        if elem.category != "column":
            continue
        box = elem.volume.obb
        col_r = max(box.half_extents.x, box.half_extents.z)
        reach = col_r + radius
        offset = Vec3(end.x - box.center.x, 0.0, end.z - box.center.z)
        if offset.norm() >= reach:
            continue
        to_col = Vec3(box.center.x - pos.x, 0.0, box.center.z - pos.z)
        heading = _horizontal(disp) if disp.norm() > 1e-9 else Vec3(1, 0, 0)
        side = 1.0 if heading.cross(to_col).y >= 0.0 else -1.0
        n_out = _horizontal(pos.sub(box.center))
        tangent = _rotate_y(n_out, -side * math.pi / 2.0)
        mag = disp.norm()
        radial_out = max(0.0, disp.dot(n_out))
        return tangent.scale(mag * 0.8).add(n_out.scale(radial_out))
    return disp


def plan_landing_path(state: AgentState, store: MetaStore,
                      max_descent_angle: float = 0.9,
                      soft_landing_speed: float = 1.2,
                      radius: float = 0.35) -> Optional[list[Vec3]]:
    """Monotone descending waypoints to a supported touch-down point.

    Tries the straight vertical drop first, then a deterministic cone of
    slanted descents; returns None when nothing collision-free exists."""
    did = store.dungeon_of_point(state.position)
    if did is None:
        return None
    candidates = [Vec3(0.0, 0.0, 0.0)]
    for ring_r in (0.8, 1.6, 2.4):
        for k in range(8):
            az = k * math.pi / 4.0
            candidates.append(Vec3(ring_r * math.cos(az), 0.0, -ring_r * math.sin(az)))
    for off in candidates:
        tx, tz = state.position.x + off.x, state.position.z + off.z
        support = store.height_at(did, tx, tz)
        if support is None:
            continue
        touchdown = Vec3(tx, support, tz)
        drop = state.position.y - support
        if drop <= 0.0:
            continue
        horiz = math.hypot(off.x, off.z)
        if horiz > 1e-9 and math.atan2(horiz, drop) > max_descent_angle:
            continue
        steps = max(3, int(drop / 0.5))
        waypoints = []
        ok = True
        for i in range(1, steps + 1):
            t = i / steps
            ease = 1.0 - (1.0 - t) ** 2   # slow the final approach
            p = Vec3(state.position.x + off.x * ease,
                     state.position.y - drop * t,
                     state.position.z + off.z * ease)
            sup_i = store.height_at(did, p.x, p.z)
            if sup_i is None or p.y < sup_i - 1e-6:
                ok = False
                break
            for elem in store.elements_of(did):
                if elem.category in ("column", "torch") and \
                        sphere_intersects_volume(Sphere(p, radius), elem.volume):
                    ok = False
                    break
            if not ok:
                break
            waypoints.append(p)
        if ok and waypoints:
            waypoints[-1] = touchdown
            return waypoints
    return None
