import math
import random

import pytest

from dungeonworld.geometry import Vec3
from dungeonworld.metastore import MetaStore, UnresolvedPositionError
from dungeonworld.worldgen import FORBIDDEN, generate_world

from conftest import stairs_config, tworoom_config


def brute_force_dungeon(world, p):
    """Independent containment: footprint prisms first, then connector
    interiors by nearer endpoint center."""
    for did in sorted(world.dungeons.keys()):
        d = world.dungeons[did]
        if d.contains(p, eps=1e-9):
            return did
    best = None
    for cid in sorted(world.connectors.keys()):
        conn = world.connectors[cid]
        if not conn.contains(p, eps=1e-9):
            continue
        for end in conn.endpoints:
            dist = p.dist(world.dungeons[end].center)
            if best is None or dist < best[0]:
                best = (dist, end)
    return best[1] if best else None


class TestDungeonOfPoint:
    def test_centroid_resolves(self, tworoom, tworoom_store):
        for did, d in tworoom.dungeons.items():
            p = Vec3(d.center.x, d.floor_altitude + 1.5, d.center.z)
            assert tworoom_store.dungeon_of_point(p) == did

    def test_far_above_is_none(self, tworoom, tworoom_store):
        d = tworoom.dungeons["d0"]
        p = Vec3(d.center.x, d.floor_altitude + 100.0, d.center.z)
        assert tworoom_store.dungeon_of_point(p) is None

    def test_matches_brute_force_oracle(self, chain8, chain8_store):
        rng = random.Random(5)
        xs = [v.x for d in chain8.dungeons.values() for v in d.footprint.vertices]
        zs = [v.z for d in chain8.dungeons.values() for v in d.footprint.vertices]
        hits = 0
        for _ in range(1000):
            p = Vec3(rng.uniform(min(xs) - 2, max(xs) + 2),
                     rng.uniform(-1.0, 8.0),
                     rng.uniform(min(zs) - 2, max(zs) + 2))
            expect = brute_force_dungeon(chain8, p)
            assert chain8_store.dungeon_of_point(p) == expect
            hits += expect is not None
        assert hits > 100  # the sample actually covered interiors

    def test_partition_no_double_resolution(self, chain8):
        # footprint prisms never overlap: no point inside two prisms
        rng = random.Random(9)
        dungeons = list(chain8.dungeons.values())
        for _ in range(500):
            d = rng.choice(dungeons)
            vs = d.footprint.vertices
            w = [rng.random() for _ in vs]
            s = sum(w)
            x = sum(v.x * wi for v, wi in zip(vs, w)) / s
            z = sum(v.z * wi for v, wi in zip(vs, w)) / s
            p = Vec3(x, d.floor_altitude + 1.0, z)
            inside = [dd.id for dd in dungeons if dd.contains(p, eps=-1e-9)]
            assert len(inside) <= 1


class TestTagging:
    def test_tag_then_query(self, tworoom, tworoom_store):
        d = tworoom.dungeons["d0"]
        p = Vec3(d.center.x, d.floor_altitude + 1.0, d.center.z)
        store = MetaStore(tworoom)
        assert store.tag_entity("e1", p) == "d0"
        assert store.tag_of("e1") == "d0"

    def test_untag(self, tworoom):
        store = MetaStore(tworoom)
        d = tworoom.dungeons["d0"]
        store.tag_entity("e1", Vec3(d.center.x, d.floor_altitude + 1.0, d.center.z))
        store.untag_entity("e1")
        assert store.tag_of("e1") is None

    def test_unresolvable_position_keeps_tag(self, tworoom):
        store = MetaStore(tworoom)
        d = tworoom.dungeons["d0"]
        store.tag_entity("e1", Vec3(d.center.x, d.floor_altitude + 1.0, d.center.z))
        with pytest.raises(UnresolvedPositionError):
            store.tag_entity("e1", Vec3(d.center.x, 500.0, d.center.z))
        assert store.tag_of("e1") == "d0"

    def test_scripted_crossing_changes_tag_once(self, tworoom):
        store = MetaStore(tworoom)
        conn = next(iter(tworoom.connectors.values()))
        a, b = conn.endpoints
        changes = []
        prev = None
        for i in range(41):
            s = -1.0 + (conn.length + 2.0) * i / 40.0
            p = conn.attach_a.add(conn.axis.scale(s))
            p = Vec3(p.x, tworoom.dungeons[a].floor_altitude + 1.0, p.z)
            did = store.tag_entity(f"walker", p)
            if prev is not None and did != prev:
                changes.append((prev, did))
            prev = did
        assert changes == [(a, b)]


class TestNearestPlane:
    def test_apothem_at_center(self):
        # regular-ish room: distance from center to nearest wall equals the
        # analytic minimum over edge distances
        cfg = tworoom_config(seed=12, has_columns=False, has_torches=False)
        world = generate_world(cfg)
        store = MetaStore(world)
        d = world.dungeons["d0"]
        p = Vec3(d.center.x, d.floor_altitude + 1.0, d.center.z)
        plane, dist = store.nearest_plane(p, "d0", {"wall"})
        apothem = min(pl.normal.dot(p) - pl.offset for pl in d.wall_planes)
        assert abs(dist - apothem) < 1e-6

    def test_on_wall_plane_distance_zero(self, tworoom, tworoom_store):
        d = tworoom.dungeons["d0"]
        v0, v1 = d.footprint.vertices[0], d.footprint.vertices[1]
        p = v0.lerp(v1, 0.5)
        p = Vec3(p.x, d.floor_altitude + 1.0, p.z)
        _, dist = tworoom_store.nearest_plane(p, "d0", {"wall"})
        assert dist < 1e-9

    def test_matches_full_scan(self, tworoom, tworoom_store):
        rng = random.Random(77)
        d = tworoom.dungeons["d0"]
        for _ in range(100):
            p = Vec3(d.center.x + rng.uniform(-3, 3),
                     d.floor_altitude + rng.uniform(0.2, 3.0),
                     d.center.z + rng.uniform(-3, 3))
            got = tworoom_store.nearest_plane(p, "d0", {"wall", "floor"})
            best = None
            for elem in tworoom_store.elements_of("d0"):
                for plane in elem.planes:
                    if plane.role not in ("wall", "floor"):
                        continue
                    dist = abs(plane.normal.dot(p) - plane.offset)
                    if best is None or dist < best:
                        best = dist
            assert abs(got[1] - best) < 1e-12

    def test_missing_role_returns_none(self, tworoom_store):
        d0 = tworoom_store.world.dungeons["d0"]
        p = Vec3(d0.center.x, 1.0, d0.center.z)
        assert tworoom_store.nearest_plane(p, "d0", {"transition"}) is None

    def test_empty_roles_rejected(self, tworoom_store):
        with pytest.raises(ValueError):
            tworoom_store.nearest_plane(Vec3(0, 0, 0), "d0", set())


class TestHeightAt:
    def test_flat_floor(self, tworoom, tworoom_store):
        d = tworoom.dungeons["d0"]
        for dx, dz in ((0, 0), (1.5, -1.0), (-2.0, 2.0)):
            h = tworoom_store.height_at("d0", d.center.x + dx, d.center.z + dz)
            assert abs(h - d.floor_altitude) < 1e-9

    def test_stairs_step_quantized(self):
        world = generate_world(stairs_config())
        store = MetaStore(world)
        conn = next(c for c in world.connectors.values() if c.kind == "stairs")
        for s0, s1, alt in conn.steps:
            mid = (s0 + s1) / 2.0
            p = conn.attach_a.add(conn.axis.scale(mid))
            did = conn.endpoints[0] if mid < conn.length / 2 else conn.endpoints[1]
            h = store.height_at(did, p.x, p.z)
            assert h is not None and abs(h - alt) < 1e-9

    def test_monotone_along_ascent(self):
        world = generate_world(stairs_config())
        store = MetaStore(world)
        conn = next(c for c in world.connectors.values() if c.kind == "stairs")
        sign = 1.0 if conn.floor_b > conn.floor_a else -1.0
        prev = None
        for i in range(40):
            s = conn.length * i / 39.0
            p = conn.attach_a.add(conn.axis.scale(s))
            did = conn.endpoints[0] if s < conn.length / 2 else conn.endpoints[1]
            h = store.height_at(did, p.x, p.z)
            if h is None:
                continue
            if prev is not None:
                assert sign * (h - prev) >= -1e-9
            prev = h

    def test_outside_footprint_returns_none(self, tworoom, tworoom_store):
        assert tworoom_store.height_at("d0", 10000.0, 10000.0) is None


class TestGraphQueries:
    def test_chain_middle_has_two_neighbors(self, chain8_store):
        neigh = chain8_store.neighbors_of("d3")
        assert len(neigh) == 2
        assert {d for _, d in neigh} == {"d2", "d4"}

    def test_progression_order_is_permutation(self, chain8, chain8_store):
        order = chain8_store.progression_order()
        assert sorted(order) == sorted(chain8.dungeons.keys())
        assert order == [f"d{i}" for i in range(8)]

    def test_neighbors_symmetric(self, chain8, chain8_store):
        for did in chain8.dungeons:
            for _, other in chain8_store.neighbors_of(did):
                back = {d for _, d in chain8_store.neighbors_of(other)}
                assert did in back

    def test_unknown_id_returns_none(self, chain8_store):
        assert chain8_store.neighbors_of("nope") is None


class TestHeadingConstraint:
    def test_open_center_free(self):
        cfg = tworoom_config(seed=3, has_columns=False, has_torches=False)
        world = generate_world(cfg)
        store = MetaStore(world)
        d = world.dungeons["d0"]
        p = Vec3(d.center.x, d.floor_altitude + 1.0, d.center.z)
        for k in range(8):
            assert store.heading_constraint("d0", p, k * math.pi / 4) == 0

    def test_agrees_with_table(self, tworoom, tworoom_store):
        rng = random.Random(21)
        table = tworoom.singularity["d0"]
        frame = table.frame
        from dungeonworld.worldgen import heading_bucket
        for _ in range(500):
            ix = rng.randrange(frame.nx)
            iz = rng.randrange(frame.nz)
            x, z = frame.center(ix, iz)
            heading = rng.uniform(0, 2 * math.pi)
            got = tworoom_store.heading_constraint("d0", Vec3(x, 1.0, z), heading)
            bucket = heading_bucket(math.cos(heading), -math.sin(heading))
            assert got == table.constraint(ix, iz, bucket)

    def test_outside_cells_forbidden(self, tworoom_store):
        assert tworoom_store.heading_constraint(
            "d0", Vec3(9999.0, 0.0, 9999.0), 0.0) == FORBIDDEN
