import socket
import warnings

import pytest

from dungeonworld.metastore import MetaStore
from dungeonworld.voxelizer import merge_grids, quantize_world
from dungeonworld.worldgen import DungeonSpec, GlobalStyle, WorldConfig, generate_world

warnings.filterwarnings("ignore", message=".*column density unsatisfiable.*")


@pytest.fixture
def unused_tcp_port():
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def spec(i, sides=6, radius=(6.5, 8.0), floor=0.0, **kw):
    return DungeonSpec(f"d{i}", f"room{i}", sides, radius, floor,
                       progression_index=i, **kw)


def tworoom_config(seed=42, kind="gate", **kw):
    return WorldConfig(seed=seed, dungeons=[spec(0, **kw), spec(1, 7, **kw)],
                       connections=[("d0", "d1", kind)])


@pytest.fixture(scope="session")
def tworoom():
    return generate_world(tworoom_config())


@pytest.fixture(scope="session")
def tworoom_store(tworoom):
    return MetaStore(tworoom)


@pytest.fixture(scope="session")
def tworoom_grids(tworoom):
    return quantize_world(tworoom, layers=4)


@pytest.fixture(scope="session")
def tworoom_merged(tworoom_grids):
    return merge_grids(tworoom_grids)


def chain8_config(seed=7):
    kinds = ["gate", "door", "tunnel", "gate", "stairs", "gate", "tunnel"]
    floors = [0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0]
    specs = [DungeonSpec(f"d{i}", f"room{i}", 5 + (i % 3), (6.0, 8.5), floors[i],
                         progression_index=i) for i in range(8)]
    conns = [(f"d{i}", f"d{i + 1}", kinds[i]) for i in range(7)]
    return WorldConfig(seed=seed, dungeons=specs, connections=conns,
                       style=GlobalStyle(wall_height=(4.6, 5.2)))


@pytest.fixture(scope="session")
def chain8():
    return generate_world(chain8_config())


@pytest.fixture(scope="session")
def chain8_store(chain8):
    return MetaStore(chain8)


@pytest.fixture(scope="session")
def chain8_grids(chain8):
    return quantize_world(chain8, layers=8)


@pytest.fixture(scope="session")
def chain8_merged(chain8_grids):
    return merge_grids(chain8_grids)


def ring_config(seed=11):
    specs = [DungeonSpec("hub", "hub", 8, (9.0, 11.0), 0.0, progression_index=0)] + \
        [DungeonSpec(f"r{i}", f"ring{i}", 6, (6.0, 7.5), 0.0, progression_index=i + 1)
         for i in range(4)]
    conns = [("hub", "r0", "gate"), ("r0", "r1", "tunnel"), ("r1", "r2", "tunnel"),
             ("r2", "r3", "tunnel"), ("r3", "r0", "tunnel")]
    return WorldConfig(seed=seed, dungeons=specs, connections=conns)


@pytest.fixture(scope="session")
def ring_world():
    return generate_world(ring_config())


def stairs_config(seed=9):
    specs = [DungeonSpec("lo", "low", 6, (6.5, 8.0), 0.0, progression_index=0),
             DungeonSpec("mid", "mid", 6, (6.5, 8.0), 1.6, progression_index=1),
             DungeonSpec("hi", "high", 5, (6.0, 7.5), 3.2, progression_index=2)]
    conns = [("lo", "mid", "stairs"), ("mid", "hi", "stairs")]
    return WorldConfig(seed=seed, dungeons=specs, connections=conns,
                       style=GlobalStyle(wall_height=(4.6, 5.2)))


@pytest.fixture(scope="session")
def stairs_world():
    return generate_world(stairs_config())


def dead_end_world(width=1.6, length=12.0):
    """Hand-built single-dungeon world shaped like a dead-end corridor.

    Tight enough that a bat's front and both side wall distances can drop
    below their triggers at once, which roundish generated chambers never
    allow.  Carries just enough metadata for the motion-AI queries."""
    from dungeonworld.geometry import (
        BoundingVolume, ConvexPolygon3, MeshBuffer, Obb, Plane, Vec3, UP,
    )
    from dungeonworld.worldgen import (
        Dungeon, Element, World, _build_height_map, build_singularity_tables,
    )
    h = width / 2.0
    pts = [(0.0, h), (length, h), (length + 0.9, 0.0), (length, -h), (0.0, -h)]
    floor = 0.0
    wall_h = 4.0
    footprint = ConvexPolygon3(tuple(Vec3(x, floor, z) for x, z in pts))
    wall_planes = []
    n = len(pts)
    for e in range(n):
        v0 = footprint.vertices[e]
        v1 = footprint.vertices[(e + 1) % n]
        tangent = v1.sub(v0).normalized()
        inward = UP.cross(tangent).normalized()
        wall_planes.append(Plane.from_point_normal(v0, inward, "wall"))
    dungeon = Dungeon(
        id="cor", name="corridor", center=Vec3(length / 2.0, floor, 0.0),
        footprint=footprint, floor_altitude=floor, wall_height=wall_h,
        floor_plane=Plane(UP, floor, "floor"),
        ceiling_plane=Plane(Vec3(0.0, -1.0, 0.0), -(floor + wall_h), "ceiling"),
        wall_planes=wall_planes, elements=[], connectors=[],
        progression_index=0)
    elements = {}
    meshes = {}
    for e in range(n):
        v0 = footprint.vertices[e]
        v1 = footprint.vertices[(e + 1) % n]
        top0 = Vec3(v0.x, floor + wall_h, v0.z)
        top1 = Vec3(v1.x, floor + wall_h, v1.z)
        mesh = MeshBuffer(f"cor:wall{e}:deploy", "wall", "cor")
        mesh.add_quad(v0, v1, top1, top0, wall_planes[e].normal)
        centroid = v0.add(v1).add(top0).add(top1).scale(0.25)
        a1 = v1.sub(v0).normalized()
        a3 = wall_planes[e].normal
        a2 = a3.cross(a1)
        obb = Obb(centroid, Vec3(v1.dist(v0) / 2 + 1e-4, wall_h / 2 + 1e-4, 0.15),
                  (a1, a2, a3))
        elem = Element(f"cor:wall{e}", "wall", "cor", BoundingVolume.from_obb(obb),
                       [wall_planes[e]], mesh.mesh_id, f"cor:wall{e}:bake")
        elements[elem.id] = elem
        meshes[mesh.mesh_id] = mesh
        dungeon.elements.append(elem.id)
    from dungeonworld.worldgen import WorldConfig as WC, DungeonSpec as DS
    cfg = WC(seed=0, dungeons=[DS("cor", "corridor", 5, (4.2, 4.2), 0.0,
                                  progression_index=0)], connections=[])
    world = World(seed=0, config=cfg, dungeons={"cor": dungeon}, connectors={},
                  elements=elements, meshes=meshes, lights=[], singularity={})
    dungeon.height_map = _build_height_map(world, dungeon,
                                           cfg.style.voxel_size)
    world.singularity = build_singularity_tables(world)
    return world
