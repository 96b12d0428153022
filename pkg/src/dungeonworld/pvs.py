"""Dynamic portal-based potentially visible set.

View volumes are convex plane bundles anchored at the camera; portals are
clipped against the active volume and successful clips open a child volume
into the neighbor dungeon.  Culling is conservative: elements whose bounding
volume cannot be proven outside are kept, so false positives are possible
but a visible element is never dropped.  Every dungeon stays a candidate at
all times (no progression-based exclusion); revisits are allowed through
distinct portals so cyclic tunnel rings resolve, bounded by a depth cap and
a per-frame chain budget.
"""

from __future__ import annotations

import math
import zlib
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

from .geometry import (
    BoundingVolume,
    ConvexPolygon3,
    Plane,
    Vec3,
    clip_polygon,
    signed_distance,
)
from .metastore import MetaStore
from .worldgen import World, heading_bucket

DEPTH_CAP = 8
CHAIN_BUDGET = 64
DOOR_CLOSED_BELOW = 0.05
NEAR_DISTANCE = 0.05
APEX_EPS = 1e-6


@dataclass
class ViewVolume:
    apex: Vec3
    lateral_planes: list[Plane]    # inward-facing, each containing the apex
    near_plane: Plane

    def contains(self, p: Vec3, eps: float = 1e-9) -> bool:
        if signed_distance(p, self.near_plane) < -eps:
            return False
        return all(signed_distance(p, pl) >= -eps for pl in self.lateral_planes)


@dataclass
class ChainRecord:
    dungeon: str
    portal: ConvexPolygon3
    depth: int


@dataclass
class VisibleSet:
    static_ids: set[str] = field(default_factory=set)
    dynamic_ids: set[str] = field(default_factory=set)
    chains: list[ChainRecord] = field(default_factory=list)
    visited_dungeons: set[str] = field(default_factory=set)


def initial_frustum(position: Vec3, look: Vec3, fov: float,
                    aspect: float, near: float = NEAR_DISTANCE) -> ViewVolume:
    """Four lateral planes + near plane for a symmetric pinhole frustum."""
    if not (0.0 < fov < math.pi):
        raise ValueError("fov out of range")
    n = look.norm()
    if abs(n - 1.0) > 1e-6:
        raise ValueError("look direction must be unit length")
    ref = Vec3(0.0, 1.0, 0.0) if abs(look.y) < 0.99 else Vec3(1.0, 0.0, 0.0)
    right = look.cross(ref).normalized().scale(-1.0)
    up = right.cross(look)

    half_h = math.tan(fov / 2.0)
    half_w = half_h * aspect
    planes = []
    for axis, extent in ((right, half_w), (up, half_h)):
        for sign in (1.0, -1.0):
            # inward normal of the plane through the apex and a frustum edge
            normal = look.scale(extent).sub(axis.scale(sign)).normalized()
            # orient so the look axis is inside
            if normal.dot(look) < 0:
                normal = normal.scale(-1.0)
            planes.append(Plane.from_point_normal(position, normal, "other"))
    near_plane = Plane.from_point_normal(position.add(look.scale(near)), look, "other")
    return ViewVolume(position, planes, near_plane)


def cast_portal(vv: ViewVolume, portal: ConvexPolygon3) -> Optional[ViewVolume]:
    """Clip the portal by the volume, then build the child volume through it.

    The child keeps the apex; its near plane is the portal plane oriented
    away from the apex, so contents behind the portal are kept and contents
    in front are not re-entered.  A portal containing the apex passes the
    parent volume through unchanged (near plane advanced only)."""
    if portal.empty:
        return None
    plane_n = portal.plane_normal()
    portal_plane = Plane.from_point_normal(portal.vertices[0], plane_n, "cross")
    apex_side = signed_distance(vv.apex, portal_plane)
    if abs(apex_side) <= APEX_EPS:
        # apex on the portal: pass the volume through, near plane advanced
        near = portal_plane
        if near.normal.dot(vv.near_plane.normal) < 0:
            near = near.flipped()
        return ViewVolume(vv.apex, list(vv.lateral_planes), near)

    clipped = portal
    for pl in vv.lateral_planes:
        clipped = clip_polygon(clipped, pl)
        if clipped.empty:
            return None
    clipped = clip_polygon(clipped, vv.near_plane)
    if clipped.empty:
        return None

    # near plane faces away from the apex
    if apex_side > 0.0:
        near = portal_plane.flipped()
    else:
        near = portal_plane
    interior_probe = clipped.centroid().add(near.normal.scale(0.1))

    laterals = []
    verts = clipped.vertices
    count = len(verts)
    for i in range(count):
        a, b = verts[i], verts[(i + 1) % count]
        n = b.sub(a).cross(a.sub(vv.apex))
        ln = n.norm()
        if ln < 1e-12:
            continue
        n = n.scale(1.0 / ln)
        plane = Plane.from_point_normal(vv.apex, n, "other")
        if signed_distance(interior_probe, plane) < 0:
            plane = plane.flipped()
        laterals.append(plane)
    if len(laterals) < 3:
        return None
    return ViewVolume(vv.apex, laterals, near)


def volume_visible(vol: BoundingVolume, vv: ViewVolume) -> bool:
    """Conservative: outside only when the sphere or the whole box is fully
    behind some plane of the view volume."""
    for plane in [vv.near_plane] + vv.lateral_planes:
        d = signed_distance(vol.sphere.center, plane)
        if d < -vol.sphere.radius:
            return False
        if d < 0.0:
            # sphere straddles: try the tighter box projection
            r = sum(h * abs(plane.normal.dot(ax))
                    for h, ax in zip(vol.obb.half_extents, vol.obb.axes))
            if signed_distance(vol.obb.center, plane) < -r:
                return False
    return True


# ---------------------------------------------------------------------------
# LRU result cache


class PvsCache:
    def __init__(self, capacity: int = 256):
        self.capacity = capacity
        self._map: OrderedDict = OrderedDict()

    def __len__(self) -> int:
        return len(self._map)

    def lookup(self, key) -> Optional[VisibleSet]:
        if key not in self._map:
            return None
        self._map.move_to_end(key)
        return self._map[key]

    def store(self, key, value: VisibleSet) -> None:
        if key in self._map:
            self._map.move_to_end(key)
        self._map[key] = value
        while len(self._map) > self.capacity:
            self._map.popitem(last=False)

    def keys(self):
        return list(self._map.keys())


def door_state_hash(door_states: dict[str, float]) -> int:
    blob = ";".join(f"{k}={v:.3f}" for k, v in sorted(door_states.items()))
    return zlib.crc32(blob.encode("utf-8"))


def cache_key(world, store: MetaStore, camera_pos: Vec3, look: Vec3,
              door_states: dict[str, float], grid) -> Optional[tuple]:
    from .voxelizer import cell_of
    cell = cell_of(grid, camera_pos)
    if cell is None:
        return None
    bucket = heading_bucket(look.x, look.z)
    return (cell.layer, cell.ix, cell.iz, bucket, door_state_hash(door_states))


# ---------------------------------------------------------------------------
# The visible-set computation


def compute_visible_set(camera_pos: Vec3, look: Vec3, config_fov: float,
                        aspect: float, world: World, store: MetaStore,
                        door_states: Optional[dict[str, float]] = None,
                        cache: Optional[PvsCache] = None,
                        cache_key_value: Optional[tuple] = None,
                        depth_cap: int = DEPTH_CAP,
                        chain_budget: int = CHAIN_BUDGET) -> VisibleSet:
    """Depth-first portal recursion from the camera's dungeon.

    A camera inside a connector corridor starts conservatively from both
    endpoint dungeons with the raw frustum.  Dynamic entities are always
    resolved fresh from the tag table, even on a cache hit."""
    doors = door_states or {}
    if cache is not None and cache_key_value is not None:
        hit = cache.lookup(cache_key_value)
        if hit is not None:
            result = VisibleSet(set(hit.static_ids), set(), list(hit.chains),
                                set(hit.visited_dungeons))
            _fill_dynamic(result, store)
            return result

    did = store.dungeon_of_point(camera_pos)
    if did is None:
        raise ValueError("camera position resolves to no dungeon")
    frustum = initial_frustum(camera_pos, look, config_fov, aspect)

    roots = [did]
    for cid in sorted(world.connectors.keys()):
        conn = world.connectors[cid]
        if conn.contains(camera_pos, eps=1e-9):
            for end in conn.endpoints:
                if end not in roots:
                    roots.append(end)

    result = VisibleSet()
    elements_by_dungeon = store._elements_by_dungeon
    budget = [chain_budget]

    def visit(dungeon_id: str, vv: ViewVolume, depth: int,
              chain: tuple[tuple[str, str], ...]) -> None:
        result.visited_dungeons.add(dungeon_id)
        for elem in elements_by_dungeon[dungeon_id]:
            if elem.id not in result.static_ids and volume_visible(elem.volume, vv):
                result.static_ids.add(elem.id)
        if depth >= depth_cap:
            return
        for conn in world.connectors_of(dungeon_id):
            key = (dungeon_id, conn.id)
            if key in chain:
                continue
            if doors.get(conn.id, 1.0) < DOOR_CLOSED_BELOW:
                continue
            child = cast_portal(vv, conn.portal)
            if child is None:
                continue
            if budget[0] <= 0:
                return
            budget[0] -= 1
            neighbor = conn.other_end(dungeon_id)
            result.chains.append(ChainRecord(neighbor, conn.portal, depth + 1))
            visit(neighbor, child, depth + 1, chain + (key,))

    for root in roots:
        visit(root, frustum, 0, ())
    _fill_dynamic(result, store)

    if cache is not None and cache_key_value is not None:
        cache.store(cache_key_value,
                    VisibleSet(set(result.static_ids), set(), list(result.chains),
                               set(result.visited_dungeons)))
    return result


def _fill_dynamic(result: VisibleSet, store: MetaStore) -> None:
    for entity, did in sorted(store._tags.items()):
        if did in result.visited_dungeons:
            result.dynamic_ids.add(entity)
