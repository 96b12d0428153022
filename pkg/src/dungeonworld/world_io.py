"""World file round trip.

One JSON document holds everything downstream stages need: meta (seed +
config echo), dungeons, connectors, elements, lights, singularity tables
and both mesh sets with flat vertex arrays.  Written canonically (sorted
keys, 9 significant digits) so identical worlds are byte-identical files.
"""

from __future__ import annotations

from .geometry import BoundingVolume, ConvexPolygon3, MeshBuffer, Obb, Plane, Sphere, Vec3
from .lattice import GridFrame
from .serialization import load_json, save_canonical
from .worldgen import (
    Connector,
    Dungeon,
    Element,
    HeightMap,
    PointLight,
    SingularityTable,
    World,
    WorldConfig,
    _Attachment,
)


def _vec(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def _to_vec(a) -> Vec3:
    return Vec3(float(a[0]), float(a[1]), float(a[2]))


def _plane(p: Plane) -> dict:
    return {"normal": _vec(p.normal), "offset": p.offset, "role": p.role}


def _to_plane(d) -> Plane:
    return Plane(_to_vec(d["normal"]), float(d["offset"]), d["role"])


def _poly(p: ConvexPolygon3) -> list[list[float]]:
    return [_vec(v) for v in p.vertices]


def _to_poly(a) -> ConvexPolygon3:
    return ConvexPolygon3(tuple(_to_vec(v) for v in a))


def _volume(v: BoundingVolume) -> dict:
    return {
        "sphere": {"center": _vec(v.sphere.center), "radius": v.sphere.radius},
        "obb": {
            "center": _vec(v.obb.center),
            "half_extents": _vec(v.obb.half_extents),
            "axes": [_vec(a) for a in v.obb.axes],
        },
    }


def _to_volume(d) -> BoundingVolume:
    return BoundingVolume(
        Sphere(_to_vec(d["sphere"]["center"]), float(d["sphere"]["radius"])),
        Obb(_to_vec(d["obb"]["center"]), _to_vec(d["obb"]["half_extents"]),
            tuple(_to_vec(a) for a in d["obb"]["axes"])),
    )


def _frame(f: GridFrame) -> dict:
    return {"origin_x": f.origin_x, "origin_z": f.origin_z, "voxel": f.voxel,
            "nx": f.nx, "nz": f.nz}


def _to_frame(d) -> GridFrame:
    return GridFrame(float(d["origin_x"]), float(d["origin_z"]),
                     float(d["voxel"]), int(d["nx"]), int(d["nz"]))


def _mesh(m: MeshBuffer) -> dict:
    pos: list[float] = []
    nrm: list[float] = []
    uv: list[float] = []
    idx: list[int] = []
    for p in m.positions:
        pos.extend((p.x, p.y, p.z))
    for n in m.normals:
        nrm.extend((n.x, n.y, n.z))
    for u, v in m.uvs:
        uv.extend((u, v))
    for tri in m.indices:
        idx.extend(tri)
    return {"id": m.mesh_id, "category": m.category, "dungeon": m.dungeon,
            "positions": pos, "normals": nrm, "uvs": uv, "indices": idx}


def _to_mesh(d) -> MeshBuffer:
    m = MeshBuffer(d["id"], d["category"], d["dungeon"])
    pos = d["positions"]
    nrm = d["normals"]
    uv = d["uvs"]
    for i in range(0, len(pos), 3):
        m.positions.append(Vec3(pos[i], pos[i + 1], pos[i + 2]))
        m.normals.append(Vec3(nrm[i], nrm[i + 1], nrm[i + 2]))
    for i in range(0, len(uv), 2):
        m.uvs.append((uv[i], uv[i + 1]))
    idx = d["indices"]
    for i in range(0, len(idx), 3):
        m.indices.append((idx[i], idx[i + 1], idx[i + 2]))
    return m


def world_to_json(world: World) -> dict:
    dungeons = []
    for did in world.dungeon_ids():
        d = world.dungeons[did]
        hm = d.height_map
        dungeons.append({
            "id": d.id, "name": d.name, "center": _vec(d.center),
            "footprint": _poly(d.footprint),
            "floor_altitude": d.floor_altitude, "wall_height": d.wall_height,
            "floor_plane": _plane(d.floor_plane),
            "ceiling_plane": _plane(d.ceiling_plane),
            "wall_planes": [_plane(p) for p in d.wall_planes],
            "elements": list(d.elements),
            "connectors": list(d.connectors),
            "progression_index": d.progression_index,
            "height_map": {"frame": _frame(hm.frame), "data": hm.data},
        })
    connectors = []
    for cid in sorted(world.connectors.keys()):
        c = world.connectors[cid]
        connectors.append({
            "id": c.id, "kind": c.kind, "endpoints": list(c.endpoints),
            "attach_a": _vec(c.attach_a), "attach_b": _vec(c.attach_b),
            "axis": _vec(c.axis), "length": c.length,
            "width_a": c.width_a, "width_b": c.width_b,
            "height_a": c.height_a, "height_b": c.height_b,
            "floor_a": c.floor_a, "floor_b": c.floor_b,
            "att_a": {"dungeon": c.att_a.dungeon, "edge": c.att_a.edge,
                      "cos_angle": c.att_a.cos_angle,
                      "hole_center_u": c.att_a.hole_center_u},
            "att_b": {"dungeon": c.att_b.dungeon, "edge": c.att_b.edge,
                      "cos_angle": c.att_b.cos_angle,
                      "hole_center_u": c.att_b.hole_center_u},
            "portal": _poly(c.portal),
            "cross_plane": _plane(c.cross_plane),
            "side_planes": [_plane(p) for p in c.side_planes],
            "elements": list(c.elements),
            "section_scales": list(c.section_scales),
            "steps": [list(s) for s in c.steps],
        })
    elements = []
    for eid in sorted(world.elements.keys()):
        e = world.elements[eid]
        elements.append({
            "id": e.id, "category": e.category, "dungeon": e.dungeon,
            "volume": _volume(e.volume),
            "planes": [_plane(p) for p in e.planes],
            "deploy_mesh": e.deploy_mesh, "bake_mesh": e.bake_mesh,
        })
    lights = [{
        "id": li.id, "position": _vec(li.position), "intensity": li.intensity,
        "color": list(li.color), "dungeon": li.dungeon,
        "source_element": li.source_element,
    } for li in sorted(world.lights, key=lambda li: li.id)]
    tables = []
    for did in sorted(world.singularity.keys()):
        t = world.singularity[did]
        tables.append({
            "dungeon": did, "frame": _frame(t.frame), "entries": t.entries,
            "no_fly": [list(c) for c in t.no_fly],
        })
    meshes = [_mesh(world.meshes[mid]) for mid in sorted(world.meshes.keys())]
    return {
        "meta": {"seed": world.seed, "config": world.config.to_json()},
        "dungeons": dungeons,
        "connectors": connectors,
        "elements": elements,
        "lights": lights,
        "singularity_tables": tables,
        "meshes": meshes,
    }


def world_from_json(doc: dict) -> World:
    config = WorldConfig.from_json(doc["meta"]["config"],
                                   seed=doc["meta"]["seed"])
    dungeons: dict[str, Dungeon] = {}
    for d in doc["dungeons"]:
        hm = HeightMap(_to_frame(d["height_map"]["frame"]),
                       [None if v is None else float(v)
                        for v in d["height_map"]["data"]])
        dungeons[d["id"]] = Dungeon(
            id=d["id"], name=d["name"], center=_to_vec(d["center"]),
            footprint=_to_poly(d["footprint"]),
            floor_altitude=float(d["floor_altitude"]),
            wall_height=float(d["wall_height"]),
            floor_plane=_to_plane(d["floor_plane"]),
            ceiling_plane=_to_plane(d["ceiling_plane"]),
            wall_planes=[_to_plane(p) for p in d["wall_planes"]],
            elements=list(d["elements"]),
            connectors=list(d["connectors"]),
            progression_index=int(d["progression_index"]),
            height_map=hm)
    connectors: dict[str, Connector] = {}
    for c in doc["connectors"]:
        connectors[c["id"]] = Connector(
            id=c["id"], kind=c["kind"],
            endpoints=(c["endpoints"][0], c["endpoints"][1]),
            attach_a=_to_vec(c["attach_a"]), attach_b=_to_vec(c["attach_b"]),
            axis=_to_vec(c["axis"]), length=float(c["length"]),
            width_a=float(c["width_a"]), width_b=float(c["width_b"]),
            height_a=float(c["height_a"]), height_b=float(c["height_b"]),
            floor_a=float(c["floor_a"]), floor_b=float(c["floor_b"]),
            att_a=_Attachment(c["att_a"]["dungeon"], int(c["att_a"]["edge"]),
                              float(c["att_a"]["cos_angle"]),
                              float(c["att_a"]["hole_center_u"])),
            att_b=_Attachment(c["att_b"]["dungeon"], int(c["att_b"]["edge"]),
                              float(c["att_b"]["cos_angle"]),
                              float(c["att_b"]["hole_center_u"])),
            portal=_to_poly(c["portal"]),
            cross_plane=_to_plane(c["cross_plane"]),
            side_planes=[_to_plane(p) for p in c["side_planes"]],
            elements=list(c["elements"]),
            section_scales=[float(s) for s in c["section_scales"]],
            steps=[(float(s[0]), float(s[1]), float(s[2])) for s in c["steps"]])
    elements: dict[str, Element] = {}
    for e in doc["elements"]:
        elements[e["id"]] = Element(
            id=e["id"], category=e["category"], dungeon=e["dungeon"],
            volume=_to_volume(e["volume"]),
            planes=[_to_plane(p) for p in e["planes"]],
            deploy_mesh=e["deploy_mesh"], bake_mesh=e["bake_mesh"])
    lights = [PointLight(
        id=li["id"], position=_to_vec(li["position"]),
        intensity=float(li["intensity"]),
        color=(li["color"][0], li["color"][1], li["color"][2]),
        dungeon=li["dungeon"], source_element=li["source_element"])
        for li in doc["lights"]]
    singularity: dict[str, SingularityTable] = {}
    for t in doc["singularity_tables"]:
        singularity[t["dungeon"]] = SingularityTable(
            _to_frame(t["frame"]), [int(e) for e in t["entries"]],
            [(int(c[0]), int(c[1])) for c in t["no_fly"]])
    meshes = {m["id"]: _to_mesh(m) for m in doc["meshes"]}
    return World(seed=int(doc["meta"]["seed"]), config=config,
                 dungeons=dungeons, connectors=connectors, elements=elements,
                 meshes=meshes, lights=lights, singularity=singularity)


def save_world(world: World, path: str) -> None:
    save_canonical(world_to_json(world), path)


def load_world(path: str) -> World:
    return world_from_json(load_json(path))


def export_obj(world: World, path: str, mesh_set: str = "deploy") -> None:
    """Wavefront OBJ export: one object group per element."""
    lines = ["# dungeonworld mesh export", f"# set: {mesh_set}"]
    offset = 1
    from .worldgen import sorted_elements
    for elem in sorted_elements(world):
        mid = elem.deploy_mesh if mesh_set == "deploy" else elem.bake_mesh
        m = world.meshes[mid]
        lines.append(f"o {elem.id}")
        for p in m.positions:
            lines.append(f"v {p.x:.6f} {p.y:.6f} {p.z:.6f}")
        for n in m.normals:
            lines.append(f"vn {n.x:.6f} {n.y:.6f} {n.z:.6f}")
        for (i, j, k) in m.indices:
            lines.append(
                f"f {i + offset}//{i + offset} {j + offset}//{j + offset} "
                f"{k + offset}//{k + offset}")
        offset += len(m.positions)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write("\n".join(lines))
        fp.write("\n")
