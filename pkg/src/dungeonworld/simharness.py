"""Deterministic fixed-timestep scenario simulator and wire server.

One tick = player input validation (and landing planning), NPC updates in
ascending agent id, the three camera phases, the visible-set computation,
then retagging of everything that moved.  All floating point flows through
the same code path in the same order, nothing reads the wall clock during
stepping, and the trace is canonical JSON Lines, so a scenario re-run is
byte-identical.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

from .camera import CameraConfig, CameraRig, CameraWorld, update_camera
from .geometry import Sphere, TriangleIndex, Vec3, sphere_intersects_volume
from .metastore import MetaStore, UnresolvedPositionError
from .npcai import (
    AgentState,
    BatParams,
    ScorpionParams,
    SerpentBrain,
    SerpentParams,
    SerpentState,
    bat_update,
    plan_landing_path,
    scorpion_update,
    serpent_update,
    validate_player_motion,
)
from .pvs import PvsCache, cache_key, compute_visible_set
from .serialization import dumps_canonical, load_json
from .voxelizer import Cell, LayeredGrid, cell_of, load_grids, merge_grids
from .worldgen import World
from .world_io import load_world


@dataclass
class AgentSpec:
    id: str
    kind: str
    dungeon: str
    params: dict = field(default_factory=dict)


@dataclass
class TimelineEntry:
    tick: int
    move: tuple[float, float] = (0.0, 0.0)
    fly: Optional[bool] = None
    land: bool = False
    camera: dict = field(default_factory=dict)


@dataclass
class Scenario:
    duration_ticks: int
    tick_rate: int = 60
    camera: dict = field(default_factory=dict)
    agents: list[AgentSpec] = field(default_factory=list)
    player_spawn: Optional[str] = None
    timeline: list[TimelineEntry] = field(default_factory=list)

    @staticmethod
    def from_json(doc: dict) -> "Scenario":
        timeline = []
        last = -1
        for e in doc.get("timeline", []):
            tick = int(e["tick"])
            if tick <= last:
                raise ValueError("timeline ticks must be strictly ascending")
            last = tick
            inp = e.get("input", {})
            timeline.append(TimelineEntry(
                tick=tick,
                move=tuple(inp.get("move", (0.0, 0.0))),
                fly=inp.get("fly"),
                land=bool(inp.get("land", False)),
                camera=inp.get("camera", {})))
        return Scenario(
            duration_ticks=int(doc["duration_ticks"]),
            tick_rate=int(doc.get("tick_rate", 60)),
            camera=doc.get("camera", {}),
            agents=[AgentSpec(a["id"], a["kind"], a["dungeon"],
                              a.get("params", {}))
                    for a in doc.get("agents", [])],
            player_spawn=doc.get("player_spawn"),
            timeline=timeline)


@dataclass
class Violations:
    camera_clip: int = 0
    npc_interpenetration: int = 0
    unresolved_position: int = 0
    pvs_soundness: int = 0

    def total(self) -> int:
        return (self.camera_clip + self.npc_interpenetration
                + self.unresolved_position + self.pvs_soundness)

    def to_json(self) -> dict:
        return {"camera_clip": self.camera_clip,
                "npc_interpenetration": self.npc_interpenetration,
                "unresolved_position": self.unresolved_position,
                "pvs_soundness": self.pvs_soundness}


class Simulation:
    """Owns all mutable state and advances it on the tick sequence."""

    def __init__(self, world: World, grids: dict[str, LayeredGrid],
                 scenario: Scenario, audit: bool = False):
        self.world = world
        self.scenario = scenario
        self.audit = audit
        self.store = MetaStore(world)
        self.grids = grids
        self.merged = merge_grids(grids)
        self.dt = 1.0 / scenario.tick_rate
        self.tick = 0
        self.violations = Violations()
        self.tri_index = TriangleIndex(world.deploy_meshes())

        self.camera_config = CameraConfig().merged(scenario.camera)
        self.cam_world = CameraWorld(self.store, self.merged,
                                     self.camera_config.collision_radius,
                                     self.tri_index)
        self.rig = CameraRig()
        self.pvs_cache = PvsCache()

        spawn = scenario.player_spawn or sorted(world.dungeons.keys())[0]
        spawn_d = world.dungeons[spawn]
        spawn_pos, spawn_heading, _ = self._safe_spawn(spawn_d, 0.35, 0.0, [])
        self.player = AgentState(id="player", kind="player",
                                 position=spawn_pos, heading=spawn_heading)
        self.player_flying = False
        self.player_speed = 3.0
        self.fly_speed = 2.0
        self.soft_landing_speed = 1.2
        self.landing_path: list[Vec3] = []
        self.store.tag_entity("player", self.player.position)

        self.agents: list[AgentState] = []
        self.serpents: dict[str, SerpentState] = {}
        self.bat_params: dict[str, BatParams] = {}
        self.scorpion_params: dict[str, ScorpionParams] = {}
        self.serpent_brain = SerpentBrain(grids)
        taken: list[tuple[Vec3, float]] = [(self.player.position, 1.0)]
        for spec in sorted(scenario.agents, key=lambda a: a.id):
            d = world.dungeons[spec.dungeon]
            radius = {"bat": 0.35, "scorpion": 0.45, "serpent_head": 0.4,
                      "mummy": 0.4}.get(spec.kind, 0.4)
            back = 0.0
            if spec.kind == "serpent_head":
                p = SerpentParams(**spec.params)
                back = p.segments * p.link_length + 1.0
            pos, heading, tail = self._safe_spawn(d, radius, back, taken)
            taken.append((pos, radius + 0.6))
            state = AgentState(id=spec.id, kind=spec.kind, position=pos,
                               heading=heading)
            if spec.kind == "bat":
                self.bat_params[spec.id] = BatParams(**spec.params)
                support = self.store.height_at(spec.dungeon, pos.x, pos.z) \
                    or d.floor_altitude
                state.position = Vec3(pos.x, support + 2.0, pos.z)
            elif spec.kind == "scorpion":
                self.scorpion_params[spec.id] = ScorpionParams(**spec.params)
            elif spec.kind == "serpent_head":
                params = SerpentParams(**spec.params)
                state.position = Vec3(pos.x, d.floor_altitude + params.body_offset,
                                      pos.z)
                sstate = SerpentState(head=state, params=params)
                _seed_serpent_history(sstate, tail)
                self.serpents[spec.id] = sstate
            self.agents.append(state)
            try:
                self.store.tag_entity(spec.id, state.position)
            except UnresolvedPositionError:
                self.violations.unresolved_position += 1

        self.current_move = (0.0, 0.0)
        self.pending_camera: dict = {}
        self.events = {"gate_crossings": 0, "flip_turns": 0, "retriggers": 0}
        self.visible_static = 0
        self.visible_dynamic = 0
        self.timeline_pos = 0
        self.trace: list[str] = []
        self.camera_path_length = 0.0
        self.visible_counts: list[int] = []

    def _safe_spawn(self, dungeon, radius: float, back_len: float,
                    taken: list[tuple[Vec3, float]]
                    ) -> tuple[Vec3, Vec3, Optional[list[Vec3]]]:
        """Deterministic spawn search: ring samples around the center, kept
        clear of columns, walls and other spawns.  Serpents also need their
        tail lead-in clear; straight tails are tried first, then coiled arcs
        so a long body still fits a cluttered chamber."""
        floor = dungeon.floor_altitude
        columns = [(e.volume.obb.center, max(e.volume.obb.half_extents.x,
                                             e.volume.obb.half_extents.z))
                   for e in self.store.elements_of(dungeon.id)
                   if e.category == "column"]
        fp = dungeon.footprint_xz()
        from .worldgen import _dist_to_boundary

        def clear(x: float, z: float, need: float) -> bool:
            if not dungeon.contains(Vec3(x, floor + 0.5, z)):
                return False
            if _dist_to_boundary(x, z, fp) < need + 0.8:
                return False
            for c, cr in columns:
                if math.hypot(x - c.x, z - c.z) < cr + need + 0.2:
                    return False
            for p, pr in taken:
                if math.hypot(x - p.x, z - p.z) < pr + need:
                    return False
            return True

        def tail_points(x: float, z: float, hx: float, hz: float,
                        turn: float) -> Optional[list[Vec3]]:
            """Backward polyline: straight when turn == 0, else an arc of
            radius 1/|turn| curving to that side.  None when blocked."""
            pts = []
            px, pz = x, z
            bx, bz = -hx, -hz
            step = 0.4
            travelled = 0.0
            while travelled < back_len:
                travelled += step
                px += bx * step
                pz += bz * step
                if not clear(px, pz, radius):
                    return None
                pts.append(Vec3(px, floor, pz))
                if turn:
                    ang = turn * step
                    c, s = math.cos(ang), math.sin(ang)
                    bx, bz = bx * c + bz * s, -bx * s + bz * c
            return pts

        candidates = [(0.0, 0.0)]
        for ring in (1.5, 3.0, 4.5, 6.0):
            for k in range(8):
                az = k * math.pi / 4.0
                candidates.append((ring * math.cos(az), -ring * math.sin(az)))
        for ox, oz in candidates:
            x, z = dungeon.center.x + ox, dungeon.center.z + oz
            if not clear(x, z, radius):
                continue
            if back_len <= 0.0:
                return Vec3(x, floor, z), Vec3(-1.0, 0.0, 0.0), None
            for k in range(8):
                az = k * math.pi / 4.0
                hx, hz = math.cos(az), -math.sin(az)
                for turn in (0.0, 0.35, -0.35, 0.55, -0.55):
                    pts = tail_points(x, z, hx, hz, turn)
                    if pts is not None:
                        return Vec3(x, floor, z), Vec3(hx, 0.0, hz), pts
        raise ValueError(
            f"no collision-free spawn in {dungeon.id} for radius {radius}")

    # -- per-tick orchestration ---------------------------------------------

    def apply_timeline(self) -> None:
        while self.timeline_pos < len(self.scenario.timeline) and \
                self.scenario.timeline[self.timeline_pos].tick <= self.tick:
            entry = self.scenario.timeline[self.timeline_pos]
            self.timeline_pos += 1
            self.current_move = entry.move
            if entry.fly is not None:
                self.player_flying = entry.fly
                self.landing_path = []
            if entry.land:
                path = plan_landing_path(self.player, self.store)
                if path:
                    self.landing_path = path
            if entry.camera:
                self.camera_config = self.camera_config.merged(entry.camera)

    def step(self, external_input: Optional[TimelineEntry] = None) -> None:
        self.apply_timeline()
        if external_input is not None:
            self.current_move = external_input.move
            if external_input.fly is not None:
                self.player_flying = external_input.fly
                self.landing_path = []
            if external_input.land:
                path = plan_landing_path(self.player, self.store)
                if path:
                    self.landing_path = path
            if external_input.camera:
                self.camera_config = self.camera_config.merged(external_input.camera)

        old_tag = self.store.tag_of("player")
        self._step_player()
        self._step_agents()
        self._step_camera()
        self._step_pvs()
        self._retag()
        if old_tag is not None and self.store.tag_of("player") != old_tag:
            self.events["gate_crossings"] += 1
        if self.audit:
            self._audit_tick()
        self._record()
        self.tick += 1

    def _step_player(self) -> None:
        if self.landing_path:
            # ease toward touchdown so the terminal vertical rate stays under
            # the soft-landing bound
            remaining = self.player.position.dist(self.landing_path[-1])
            speed = min(self.fly_speed,
                        max(0.5 * self.soft_landing_speed,
                            self.soft_landing_speed + 1.2 * (remaining - 0.5)))
            target = self.landing_path[0]
            gap = self.player.position.dist(target)
            travel = speed * self.dt
            if gap <= travel:
                self.player.position = target
                self.landing_path.pop(0)
                if not self.landing_path:
                    self.player_flying = False
            else:
                self.player.position = self.player.position.lerp(target, travel / gap)
            return
        mx, mz = self.current_move
        disp = Vec3(0.0, 0.0, 0.0)
        if abs(mx) > 1e-12 or abs(mz) > 1e-12:
            heading = Vec3(mx, 0.0, mz)
            heading = heading.scale(1.0 / heading.norm())
            self.player.heading = heading
            try:
                disp = validate_player_motion(
                    self.player, heading.scale(self.player_speed * self.dt),
                    self.store)
            except UnresolvedPositionError:
                self.violations.unresolved_position += 1
                return
        pos = self.player.position.add(disp)
        did = self.store.dungeon_of_point(pos) \
            or self.store.dungeon_of_point(self.player.position)
        if did is None:
            self.violations.unresolved_position += 1
            return
        support = self.store.height_at(did, pos.x, pos.z)
        if support is not None:
            if self.player_flying:
                target_y = support + 2.0
                dy = max(-self.fly_speed * self.dt,
                         min(self.fly_speed * self.dt, target_y - pos.y))
                pos = Vec3(pos.x, pos.y + dy, pos.z)
            else:
                pos = Vec3(pos.x, support, pos.z)
        if self.store.dungeon_of_point(pos) is not None:
            self.player.position = pos

    def _step_agents(self) -> None:
        for agent in self.agents:
            try:
                if agent.kind == "bat":
                    _, decision = bat_update(agent, self.player.position, self.store,
                                             self.bat_params[agent.id], self.dt)
                    if decision.kind == "flip_turn" and agent.mode == "flip" \
                            and decision.magnitude == 0.0:
                        self.events["flip_turns"] += 1
                elif agent.kind == "scorpion":
                    scorpion_update(agent, self.player.position, self.agents,
                                    self.store, self.scorpion_params[agent.id], self.dt)
                elif agent.kind == "serpent_head":
                    ss = serpent_update(self.serpents[agent.id], self.player.position,
                                        self.store, self.serpent_brain, self.dt)
                    self.agents[self.agents.index(agent)] = ss.head
                elif agent.kind == "mummy":
                    self._mummy_update(agent)
            except UnresolvedPositionError:
                self.violations.unresolved_position += 1

    def _mummy_update(self, agent: AgentState) -> None:
        # generic pursue with wall slide; mummies have no special casework
        did = self.store.dungeon_of_point(agent.position)
        if did is None:
            raise UnresolvedPositionError(agent.id)
        to_player = self.player.position.sub(agent.position)
        h = Vec3(to_player.x, 0.0, to_player.z)
        n = h.norm()
        if n < 1e-9:
            return
        agent.heading = h.scale(1.0 / n)
        from .npcai import validate_ground_motion
        disp = validate_ground_motion(agent.position,
                                      agent.heading.scale(1.2 * self.dt),
                                      self.store, did, 0.4)
        pos = agent.position.add(disp)
        support = self.store.height_at(did, pos.x, pos.z)
        if support is not None:
            pos = Vec3(pos.x, support, pos.z)
        if self.store.dungeon_of_point(pos) is not None:
            agent.position = pos

    def _step_camera(self) -> None:
        before = self.rig.position
        retrig_before = self.rig.retrigger
        update_camera(self.rig, self.player.position, self.player.heading,
                      self.camera_config, self.cam_world, self.dt)
        if self.rig.retrigger and not retrig_before:
            self.events["retriggers"] += 1
        if before is not None and self.rig.position is not None:
            self.camera_path_length += self.rig.position.dist(before)

    def _step_pvs(self) -> None:
        if self.rig.position is None or self.rig.look_target is None:
            self.visible_static = 0
            self.visible_dynamic = 0
            self.last_visible = None
            return
        look = self.rig.look_target.sub(self.rig.position)
        n = look.norm()
        if n < 1e-9:
            look = Vec3(1.0, 0.0, 0.0)
        else:
            look = look.scale(1.0 / n)
        try:
            key = None if self.audit else cache_key(
                self.world, self.store, self.rig.position, look, {}, self.merged)
            vs = compute_visible_set(
                self.rig.position, look, self.camera_config.fov,
                self.camera_config.aspect, self.world, self.store,
                cache=None if self.audit else self.pvs_cache,
                cache_key_value=key)
        except ValueError:
            self.violations.unresolved_position += 1
            self.last_visible = None
            return
        self.last_visible = vs
        self.visible_static = len(vs.static_ids)
        self.visible_dynamic = len(vs.dynamic_ids)
        self.visible_counts.append(self.visible_static)

    def _retag(self) -> None:
        for agent in [self.player] + self.agents:
            try:
                self.store.tag_entity(agent.id, agent.position)
            except UnresolvedPositionError:
                self.violations.unresolved_position += 1

    # -- audits ---------------------------------------------------------------

    def _audit_tick(self) -> None:
        self._audit_camera()
        self._audit_npcs()

    def _audit_camera(self) -> None:
        if self.rig.position is None:
            return
        # penetration test: exact tangency sits on the clearance-mask boundary
        # and float noise must not count as a clip
        r = self.camera_config.collision_radius - 1e-9
        pos = self.rig.position
        grid = self.merged
        cell = cell_of(grid, pos)
        if cell is not None:
            reach = int(math.ceil(r / grid.voxel_size)) + 1
            for dl in (-1, 0, 1):
                for dx in range(-reach, reach + 1):
                    for dz in range(-reach, reach + 1):
                        c = Cell(cell.layer + dl, cell.ix + dx, cell.iz + dz)
                        if not grid.in_bounds(c) or not grid.is_solid(c):
                            continue
                        if self._sphere_hits_cell(pos, r, grid, c):
                            self.violations.camera_clip += 1
                            return
        s = Sphere(pos, r)
        for eid in sorted(self.world.elements.keys()):
            if sphere_intersects_volume(s, self.world.elements[eid].volume):
                self.violations.camera_clip += 1
                return

    @staticmethod
    def _sphere_hits_cell(pos: Vec3, r: float, grid: LayeredGrid, c: Cell) -> bool:
        x0 = grid.frame.origin_x + c.ix * grid.voxel_size
        z0 = grid.frame.origin_z + c.iz * grid.voxel_size
        y0 = grid.layer_boundaries[c.layer]
        y1 = grid.layer_boundaries[c.layer + 1]
        qx = max(x0, min(pos.x, x0 + grid.voxel_size))
        qy = max(y0, min(pos.y, y1))
        qz = max(z0, min(pos.z, z0 + grid.voxel_size))
        dx, dy, dz = pos.x - qx, pos.y - qy, pos.z - qz
        return dx * dx + dy * dy + dz * dz < r * r

    def _audit_npcs(self) -> None:
        states = [a for a in self.agents]
        for ss in self.serpents.values():
            pass
        for agent in states:
            radius = {"bat": 0.35, "scorpion": 0.45, "serpent_head": 0.4,
                      "mummy": 0.4}.get(agent.kind, 0.4)
            did = self.store.tag_of(agent.id)
            if did is None:
                continue
            for elem in self.store.elements_of(did):
                if elem.category == "column" and sphere_intersects_volume(
                        Sphere(agent.position, radius), elem.volume):
                    self.violations.npc_interpenetration += 1
        for ss in self.serpents.values():
            did = self.store.tag_of(ss.head.id)
            if did is None:
                continue
            for pos, _ in ss.segment_poses:
                for elem in self.store.elements_of(did):
                    if elem.category == "column" and sphere_intersects_volume(
                            Sphere(pos, ss.params.radius), elem.volume):
                        self.violations.npc_interpenetration += 1

    # -- trace ------------------------------------------------------------------

    def _record(self) -> None:
        cam = self.rig.position
        rec = {
            "tick": self.tick,
            "player_pos": [self.player.position.x, self.player.position.y,
                           self.player.position.z],
            "player_dungeon": self.store.tag_of("player"),
            "camera_pos": None if cam is None else [cam.x, cam.y, cam.z],
            "camera_phase": self.rig.phase,
            "visible_static": self.visible_static,
            "visible_dynamic": self.visible_dynamic,
            "agents": [{"id": a.id,
                        "pos": [a.position.x, a.position.y, a.position.z],
                        "mode": a.mode}
                       for a in self.agents],
            "violations": self.violations.to_json(),
        }
        self.trace.append(dumps_canonical(rec))

    def frame_payload(self) -> dict:
        """Wire `frame` payload: trace record extras for the viewer."""
        vs = getattr(self, "last_visible", None)
        chains = []
        visible_ids = []
        if vs is not None:
            visible_ids = sorted(vs.static_ids)
            for c in vs.chains:
                chains.append({
                    "dungeon": c.dungeon, "depth": c.depth,
                    "portal": [[v.x, v.y, v.z] for v in c.portal.vertices]})
        cam = self.rig.position
        look = self.rig.look_target
        return {
            "tick": self.tick,
            "player": {"pos": _v3(self.player.position),
                       "heading": _v3(self.player.heading),
                       "dungeon": self.store.tag_of("player"),
                       "flying": self.player_flying},
            "camera": {"pos": None if cam is None else _v3(cam),
                       "look": None if look is None else _v3(look),
                       "phase": self.rig.phase,
                       "path": [_v3(p) for p in self.rig.path[self.rig.path_index:]]},
            "agents": [{"id": a.id, "kind": a.kind, "pos": _v3(a.position),
                        "heading": _v3(a.heading), "mode": a.mode}
                       for a in self.agents],
            "serpents": [{"id": sid,
                          "segments": [_v3(p) for p, _ in ss.segment_poses]}
                         for sid, ss in sorted(self.serpents.items())],
            "visible_count": self.visible_static,
            "visible_dynamic": self.visible_dynamic,
            "visible_ids": visible_ids,
            "portal_chains": chains,
            "violations": self.violations.to_json(),
        }


def _v3(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def _seed_serpent_history(sstate: SerpentState,
                          tail: Optional[list[Vec3]]) -> None:
    """Record the verified spawn tail polyline as initial head history so the
    segments start on a collision-free line of travel."""
    params = sstate.params
    head_pos = sstate.head.position
    pts = [head_pos] + [Vec3(p.x, head_pos.y, p.z)
                        for p in (tail or [])]
    if len(pts) < 2:
        back = sstate.head.heading.scale(-1.0)
        total = params.segments * params.link_length + 1.0
        pts = [head_pos, head_pos.add(back.scale(total))]
    # history runs oldest-first with ascending arc; the tail is newest-last
    arcs = [0.0]
    for a, b in zip(pts, pts[1:]):
        arcs.append(arcs[-1] + a.dist(b))
    total = arcs[-1]
    sstate.history.clear()
    for p, s in zip(reversed(pts), reversed(arcs)):
        sstate.history.append((total - s, p))
    sstate.arc = total
    from .npcai import resample_segments
    resample_segments(sstate)


@dataclass
class Metrics:
    ticks: int
    mean_visible: float
    max_visible: int
    culled_fraction: float
    camera_path_length: float
    flip_turns: int
    gate_crossings: int
    retriggers: int
    violations: dict

    def to_json(self) -> dict:
        return {
            "ticks": self.ticks,
            "mean_visible": self.mean_visible,
            "max_visible": self.max_visible,
            "culled_fraction": self.culled_fraction,
            "camera_path_length": self.camera_path_length,
            "flip_turns": self.flip_turns,
            "gate_crossings": self.gate_crossings,
            "retriggers": self.retriggers,
            "violations": self.violations,
        }


def run_scenario(world: World, grids: dict[str, LayeredGrid], scenario: Scenario,
                 audit: bool = False) -> tuple[Simulation, Metrics]:
    sim = Simulation(world, grids, scenario, audit=audit)
    for _ in range(scenario.duration_ticks):
        sim.step()
    total_static = len(world.elements)
    counts = sim.visible_counts
    mean_visible = sum(counts) / len(counts) if counts else 0.0
    metrics = Metrics(
        ticks=scenario.duration_ticks,
        mean_visible=mean_visible,
        max_visible=max(counts) if counts else 0,
        culled_fraction=(1.0 - mean_visible / total_static) if total_static else 0.0,
        camera_path_length=sim.camera_path_length,
        flip_turns=sim.events["flip_turns"],
        gate_crossings=sim.events["gate_crossings"],
        retriggers=sim.events["retriggers"],
        violations=sim.violations.to_json(),
    )
    return sim, metrics


def write_trace(sim: Simulation, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for line in sim.trace:
            fp.write(line)
            fp.write("\n")


def load_scenario(path: str) -> Scenario:
    return Scenario.from_json(load_json(path))


# ---------------------------------------------------------------------------
# Wire server


async def serve(world: World, grids: dict[str, LayeredGrid], port: int = 8080,
                static_dir: Optional[str] = None,
                max_ticks: Optional[int] = None) -> None:
    """One interactive session over WebSocket; static assets over plain HTTP.

    The tick loop runs at the scenario rate on wall time; inbound `input`
    messages queue and apply at the next tick boundary (last writer wins)."""
    import asyncio
    import json as _json
    import os

    from websockets.asyncio.server import serve as ws_serve

    scenario = Scenario(duration_ticks=0)
    sim = Simulation(world, grids, scenario)
    seq = [0]
    pending: list[dict] = []
    overlays = {"graph": False, "voxels": False, "portals": False, "visible": False}

    def snapshot_payload() -> dict:
        w = sim.world
        return {
            "dungeons": [{
                "id": d.id, "name": d.name,
                "center": _v3(d.center),
                "floor_altitude": d.floor_altitude,
                "footprint": [[v.x, v.y, v.z] for v in d.footprint.vertices],
                "progression_index": d.progression_index,
                "connectors": list(d.connectors),
            } for d in (w.dungeons[k] for k in w.dungeon_ids())],
            "connectors": [{
                "id": c.id, "kind": c.kind, "endpoints": list(c.endpoints),
                "portal": [[v.x, v.y, v.z] for v in c.portal.vertices],
                "attach_a": _v3(c.attach_a), "attach_b": _v3(c.attach_b),
                "width_a": c.width_a, "width_b": c.width_b,
            } for c in (w.connectors[k] for k in sorted(w.connectors.keys()))],
            "elements": [{
                "id": e.id, "category": e.category, "dungeon": e.dungeon,
                "center": _v3(e.volume.obb.center),
                "radius": e.volume.sphere.radius,
            } for e in (w.elements[k] for k in sorted(w.elements.keys()))],
            "lights": [{"id": li.id, "pos": _v3(li.position)} for li in w.lights],
            "grid": _grid_summary(sim.merged),
            "tick_rate": sim.scenario.tick_rate,
        }

    async def handler(ws):
        seq[0] += 1
        await ws.send(_json.dumps(
            {"type": "snapshot", "seq": seq[0], "payload": snapshot_payload()}))

        async def reader():
            async for raw in ws:
                try:
                    msg = _json.loads(raw)
                    if msg.get("type") != "input":
                        raise ValueError("expected input message")
                    pending.append(msg.get("payload", {}))
                except (ValueError, KeyError) as e:
                    seq[0] += 1
                    await ws.send(_json.dumps(
                        {"type": "error", "seq": seq[0], "payload": str(e)}))

        reader_task = asyncio.ensure_future(reader())
        dt = 1.0 / sim.scenario.tick_rate
        ticks_done = 0
        try:
            while max_ticks is None or ticks_done < max_ticks:
                t0 = time.monotonic()
                entry = None
                if pending:
                    merged: dict = {}
                    for p in pending:
                        merged.update({k: v for k, v in p.items() if v is not None})
                    pending.clear()
                    if "overlays" in merged:
                        overlays.update(merged["overlays"])
                    entry = TimelineEntry(
                        tick=sim.tick,
                        move=tuple(merged.get("move", sim.current_move)),
                        fly=merged.get("fly"),
                        land=bool(merged.get("land", False)),
                        camera=merged.get("camera", {}))
                sim.step(entry)
                ticks_done += 1
                seq[0] += 1
                payload = sim.frame_payload()
                payload["overlays"] = dict(overlays)
                await ws.send(_json.dumps(
                    {"type": "frame", "seq": seq[0], "payload": payload}))
                elapsed = time.monotonic() - t0
                await asyncio.sleep(max(0.0, dt - elapsed))
        finally:
            reader_task.cancel()

    def _static_response(ctype: str, body: bytes):
        from websockets.datastructures import Headers
        from websockets.http11 import Response
        return Response(200, "OK", Headers([
            ("Content-Type", ctype), ("Content-Length", str(len(body)))]), body)

    def process_request(connection, request):
        # plain HTTP requests serve the viewer assets; upgrades fall through
        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None
        path = request.path.split("?")[0]
        if path == "/":
            path = "/index.html"
        if static_dir is not None:
            root = os.path.realpath(static_dir)
            full = os.path.realpath(os.path.join(root, path.lstrip("/")))
            if full.startswith(root + os.sep) and os.path.isfile(full):
                ctype = {"html": "text/html", "js": "text/javascript",
                         "css": "text/css", "map": "application/json"}.get(
                    full.rsplit(".", 1)[-1], "application/octet-stream")
                with open(full, "rb") as fp:
                    return _static_response(ctype, fp.read())
        return _static_response("text/plain", b"dungeonworld wire server\n")

    async with ws_serve(handler, "127.0.0.1", port,
                        process_request=process_request):
        print(f"serving on ws://127.0.0.1:{port}", flush=True)
        await asyncio.get_event_loop().create_future()


def _grid_summary(grid: LayeredGrid) -> dict:
    mid = grid.layer_count // 2
    rows = []
    for iz in range(grid.frame.nz):
        row = grid.occupancy[mid][iz * grid.frame.nx:(iz + 1) * grid.frame.nx]
        rows.append("".join("1" if b else "0" for b in row))
    return {
        "origin_x": grid.frame.origin_x, "origin_z": grid.frame.origin_z,
        "voxel": grid.voxel_size, "nx": grid.frame.nx, "nz": grid.frame.nz,
        "mid_layer": rows,
    }


def load_inputs(world_path: str, grids_path: str) -> tuple[World, dict[str, LayeredGrid]]:
    world = load_world(world_path)
    grids = load_grids(grids_path)
    return world, grids
