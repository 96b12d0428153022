"""Runtime access to the generated world metadata.

The store answers the queries every other subsystem leans on (current
dungeon of a point, nearest plane by role, floor support height, graph
neighbors, heading constraints) and keeps the one piece of dynamic state:
the entity -> dungeon tag table.  Queries never mutate the store; tag edits
touch only the tag table and must be serialized with reads by the caller
(the simulation tick does all writes).
"""

from __future__ import annotations

import math
from typing import Optional

from .geometry import Plane, Vec3
from .worldgen import (
    FORBIDDEN,
    Connector,
    Dungeon,
    Element,
    HEADING_BUCKETS,
    World,
    heading_bucket,
)


class UnresolvedPositionError(ValueError):
    """A query position lies outside every dungeon and connector."""


class MetaStore:
    def __init__(self, world: World):
        self.world = world
        self._tags: dict[str, str] = {}
        self._elements_by_dungeon = world.elements_by_dungeon()
        # planes per dungeon, gathered once from its tagged elements
        self._planes: dict[str, list[Plane]] = {}
        for did, elems in self._elements_by_dungeon.items():
            planes: list[Plane] = []
            for e in elems:
                planes.extend(e.planes)
            self._planes[did] = planes
        self._no_fly: dict[str, set[tuple[int, int]]] = {
            did: set(t.no_fly) for did, t in world.singularity.items()}

    # -- spatial resolution -------------------------------------------------

    def dungeon_of_point(self, p: Vec3) -> Optional[str]:
        """Containing dungeon id, or None.

        Footprint prisms win outright; connector interiors resolve to the
        endpoint whose center is nearer, which also breaks ties for points
        exactly on a cross plane.
        """
        for did in self.world.dungeon_ids():
            if self.world.dungeons[did].contains(p, eps=1e-9):
                return did
        best: Optional[tuple[float, str]] = None
        for cid in sorted(self.world.connectors.keys()):
            conn = self.world.connectors[cid]
            if not conn.contains(p, eps=1e-9):
                continue
            a, b = conn.endpoints
            da = p.dist(self.world.dungeons[a].center)
            db = p.dist(self.world.dungeons[b].center)
            d, did = min((da, a), (db, b))
            if best is None or d < best[0]:
                best = (d, did)
        return best[1] if best else None

    def elements_of(self, dungeon_id: str) -> list[Element]:
        return self._elements_by_dungeon[dungeon_id]

    # -- dynamic tagging ----------------------------------------------------

    def tag_entity(self, entity_id: str, p: Vec3) -> str:
        did = self.dungeon_of_point(p)
        if did is None:
            raise UnresolvedPositionError(
                f"entity {entity_id}: position outside all dungeons")
        self._tags[entity_id] = did
        return did

    def untag_entity(self, entity_id: str) -> None:
        self._tags.pop(entity_id, None)

    def tag_of(self, entity_id: str) -> Optional[str]:
        return self._tags.get(entity_id)

    def entities_tagged(self, dungeon_id: str) -> list[str]:
        return sorted(e for e, d in self._tags.items() if d == dungeon_id)

    # -- geometric queries --------------------------------------------------

    def nearest_plane(self, p: Vec3, dungeon_id: str, roles: set[str]
                      ) -> Optional[tuple[Plane, float]]:
        """Plane with matching role at minimal |signed distance| among the
        dungeon's element planes (dungeon-level wall/floor/ceiling planes are
        carried by wall/floor/ceiling elements)."""
        if not roles:
            raise ValueError("empty role set")
        best: Optional[tuple[Plane, float]] = None
        for plane in self._planes[dungeon_id]:
            if plane.role not in roles:
                continue
            d = abs(plane.normal.dot(p) - plane.offset)
            if best is None or d < best[1]:
                best = (plane, d)
        return best

    def directed_clearance(self, p: Vec3, direction: Vec3, dungeon_id: str,
                           roles: set[str]) -> float:
        """Distance from p along direction to the nearest role-matching plane
        facing the ray (used for the bat wall-distance triggers)."""
        best = math.inf
        for plane in self._planes[dungeon_id]:
            if plane.role not in roles:
                continue
            denom = plane.normal.dot(direction)
            if denom >= -1e-9:
                continue  # plane faces away or is parallel
            t = -(plane.normal.dot(p) - plane.offset) / denom
            if t > 1e-9:
                best = min(best, t)
        return best

    def height_at(self, dungeon_id: str, x: float, z: float) -> Optional[float]:
        """Floor support altitude: step-quantized on stairs corridors,
        bilinear height-map sampling elsewhere."""
        dungeon = self.world.dungeons[dungeon_id]
        from .worldgen import corridor_halves
        p = Vec3(x, 0.0, z)
        for conn, _, _ in corridor_halves(self.world, dungeon_id):
            if conn.kind != "stairs":
                continue
            s = conn.station_of(p)
            if -1e-9 <= s <= conn.length + 1e-9 and \
                    abs(conn.lateral_of(p)) <= conn.width_at(s) / 2.0 + 1e-9:
                return conn.support_altitude(min(max(s, 0.0), conn.length))
        hm = dungeon.height_map
        frame = hm.frame
        fx = (x - frame.origin_x) / frame.voxel - 0.5
        fz = (z - frame.origin_z) / frame.voxel - 0.5
        ix0, iz0 = math.floor(fx), math.floor(fz)
        tx, tz = fx - ix0, fz - iz0
        samples = []
        weights = []
        for dz in (0, 1):
            for dx in (0, 1):
                v = hm.sample_cell(ix0 + dx, iz0 + dz)
                w = (tx if dx else 1 - tx) * (tz if dz else 1 - tz)
                if v is not None:
                    samples.append(v * w)
                    weights.append(w)
        if not weights or sum(weights) < 1e-9:
            return None
        return sum(samples) / sum(weights)

    # -- graph queries ------------------------------------------------------

    def neighbors_of(self, dungeon_id: str) -> Optional[list[tuple[Connector, str]]]:
        if dungeon_id not in self.world.dungeons:
            return None
        out = []
        for conn in self.world.connectors_of(dungeon_id):
            out.append((conn, conn.other_end(dungeon_id)))
        return out

    def progression_order(self) -> list[str]:
        return sorted(self.world.dungeons.keys(),
                      key=lambda d: self.world.dungeons[d].progression_index)

    # -- heading constraints --------------------------------------------------

    def heading_constraint(self, dungeon_id: str, p: Vec3, heading: float) -> int:
        """Singularity-table lookup at (cell of p, bucket of heading).

        heading is the xz azimuth in radians, matching heading_bucket's
        convention (0 along +x, increasing counter-clockwise about +y).
        """
        table = self.world.singularity[dungeon_id]
        cell = table.frame.cell_of(p.x, p.z)
        if cell is None:
            return FORBIDDEN
        bucket = heading_bucket(math.cos(heading), -math.sin(heading))
        return table.constraint(cell[0], cell[1], bucket)

    def heading_constraint_vec(self, dungeon_id: str, p: Vec3, hx: float,
                               hz: float) -> int:
        table = self.world.singularity[dungeon_id]
        cell = table.frame.cell_of(p.x, p.z)
        if cell is None:
            return FORBIDDEN
        return table.constraint(cell[0], cell[1], heading_bucket(hx, hz))

    def is_no_fly(self, dungeon_id: str, p: Vec3) -> bool:
        table = self.world.singularity[dungeon_id]
        cell = table.frame.cell_of(p.x, p.z)
        return cell is not None and cell in self._no_fly[dungeon_id]


def make_store(world: World) -> MetaStore:
    return MetaStore(world)
