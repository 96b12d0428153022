"""Lightmap baking over the generated world.

Surfaces group by (dungeon, category, coplanar plane set) and pack into
power-of-two atlases walked in progression order, so every dungeon shares
an atlas with its progression neighbor whenever it fits.  Bake meshes gain
crease-band tessellation where another element's plane meets them at a
sharp angle, hemisphere ambient occlusion is computed per vertex with a
deterministic low-discrepancy ray set, and texels accumulate inverse-square
Lambertian light with shadow rays, all scaled by the interpolated occlusion.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field
from typing import Optional

from .geometry import MeshBuffer, Plane, TriangleIndex, Vec3, signed_distance
from .metastore import MetaStore
from .serialization import save_canonical
from .worldgen import Element, PointLight, World

GUTTER = 2


@dataclass
class BakeConfig:
    texels_per_unit: float = 4.0
    atlas_size: int = 1024
    dungeon_scale: dict = field(default_factory=dict)
    element_scale: dict = field(default_factory=dict)
    ao_rays: int = 64
    ao_max_distance: float = 4.0
    crease_band: float = 0.5
    subdivision_level: int = 2
    ambient_floor: float = 0.03
    gamma: bool = False

    def __post_init__(self) -> None:
        if self.texels_per_unit <= 0 or self.ao_rays <= 0 or \
                self.ao_max_distance <= 0 or self.crease_band <= 0:
            raise ValueError("bake parameters must be positive")
        if not (0.0 <= self.ambient_floor < 1.0):
            raise ValueError("ambient floor must be in [0, 1)")
        if self.atlas_size & (self.atlas_size - 1):
            raise ValueError("atlas size must be a power of two")

    def scale_for(self, element: Element) -> float:
        return (self.dungeon_scale.get(element.dungeon, 1.0)
                * self.element_scale.get(element.id, 1.0))


@dataclass
class ChartFace:
    origin: Vec3          # world point mapping to the face rect's corner
    u_dir: Vec3
    v_dir: Vec3
    normal: Vec3
    px: int               # placement inside the chart, texels
    py: int
    w: int
    h: int
    triangles: list[int]  # deploy-mesh triangle indices


@dataclass
class Chart:
    element_id: str
    group_id: str
    width: int
    height: int
    scale: float
    faces: list[ChartFace]
    atlas_id: Optional[str] = None
    atlas_x: int = 0
    atlas_y: int = 0

    def rect(self) -> tuple[int, int, int, int]:
        return (self.atlas_x, self.atlas_y, self.width, self.height)

    def transform(self) -> dict:
        f = self.faces[0]
        return {"origin": [f.origin.x, f.origin.y, f.origin.z],
                "u_dir": [f.u_dir.x, f.u_dir.y, f.u_dir.z],
                "v_dir": [f.v_dir.x, f.v_dir.y, f.v_dir.z],
                "texels_per_unit": None}


@dataclass
class Atlas:
    id: str
    size: int
    dungeons: list[str] = field(default_factory=list)
    charts: list[Chart] = field(default_factory=list)
    pixels: Optional[list[float]] = None   # rgb floats, row-major


# ---------------------------------------------------------------------------
# Grouping


def _plane_key(normal: Vec3, offset: float) -> tuple:
    return (round(normal.x, 4), round(normal.y, 4), round(normal.z, 4),
            round(offset, 3))


def _mesh_faces(mesh: MeshBuffer) -> list[tuple[Vec3, list[int]]]:
    """Coplanar faces as (normal, triangle indices), grouped by the stored
    per-vertex normals (constant per generated face)."""
    groups: dict[tuple, list[int]] = {}
    order: list[tuple] = []
    for t, (i, _, _) in enumerate(mesh.indices):
        n = mesh.normals[i]
        a = mesh.positions[i]
        key = _plane_key(n, n.dot(a))
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(t)
    out = []
    for key in order:
        tris = groups[key]
        i0 = mesh.indices[tris[0]][0]
        out.append((mesh.normals[i0], tris))
    return out


def group_surfaces(world: World, store: MetaStore, config: BakeConfig
                   ) -> dict[str, list[Chart]]:
    """Charts for every element, grouped by (dungeon, category, plane set).

    The group id never spans dungeons; chart resolution is texels-per-unit
    scaled by the dungeon and element overrides."""
    groups: dict[str, list[Chart]] = {}
    for eid in sorted(world.elements.keys()):
        elem = world.elements[eid]
        mesh = world.meshes[elem.deploy_mesh]
        scale = config.scale_for(elem)
        chart = _build_chart(elem, mesh, config.texels_per_unit * scale)
        faces0 = _mesh_faces(mesh)
        n0 = faces0[0][0]
        a0 = mesh.positions[mesh.indices[faces0[0][1][0]][0]]
        gid = f"{elem.dungeon}/{elem.category}/{_plane_key(n0, n0.dot(a0))}"
        chart.group_id = gid
        groups.setdefault(gid, []).append(chart)
    return groups


def _face_basis(normal: Vec3, first_edge: Vec3) -> tuple[Vec3, Vec3]:
    u = first_edge.sub(normal.scale(first_edge.dot(normal)))
    n = u.norm()
    if n < 1e-9:
        ref = Vec3(0.0, 1.0, 0.0) if abs(normal.y) < 0.99 else Vec3(1.0, 0.0, 0.0)
        u = normal.cross(ref)
        n = u.norm()
    u = u.scale(1.0 / n)
    v = normal.cross(u)
    return u, v


def _build_chart(elem: Element, mesh: MeshBuffer, tpu: float) -> Chart:
    faces: list[ChartFace] = []
    for normal, tris in _mesh_faces(mesh):
        verts = sorted({i for t in tris for i in mesh.indices[t]})
        p0 = mesh.positions[mesh.indices[tris[0]][0]]
        p1 = mesh.positions[mesh.indices[tris[0]][1]]
        u_dir, v_dir = _face_basis(normal, p1.sub(p0))
        us = [mesh.positions[i].sub(p0).dot(u_dir) for i in verts]
        vs = [mesh.positions[i].sub(p0).dot(v_dir) for i in verts]
        u0, v0 = min(us), min(vs)
        w = max(1, math.ceil((max(us) - u0) * tpu) + 1)
        h = max(1, math.ceil((max(vs) - v0) * tpu) + 1)
        origin = p0.add(u_dir.scale(u0)).add(v_dir.scale(v0))
        faces.append(ChartFace(origin, u_dir, v_dir, normal, 0, 0, w, h, tris))

    # shelf-pack the faces inside the chart (tallest first)
    order = sorted(range(len(faces)), key=lambda i: (-faces[i].h, -faces[i].w, i))
    chart_w = max(f.w for f in faces)
    x = y = shelf_h = 0
    for i in order:
        f = faces[i]
        if x + f.w > chart_w and x > 0:
            y += shelf_h + 1
            x = 0
            shelf_h = 0
        f.px, f.py = x, y
        x += f.w + 1
        shelf_h = max(shelf_h, f.h)
    chart_h = y + shelf_h
    chart = Chart(elem.id, "", chart_w, chart_h, tpu, faces)
    _write_uvs(mesh, chart)
    return chart


def _write_uvs(mesh: MeshBuffer, chart: Chart) -> None:
    for f in chart.faces:
        for t in f.triangles:
            for vi in mesh.indices[t]:
                p = mesh.positions[vi].sub(f.origin)
                mesh.uvs[vi] = (f.px + p.dot(f.u_dir) * chart.scale,
                                f.py + p.dot(f.v_dir) * chart.scale)


# ---------------------------------------------------------------------------
# Packing and atlas assignment


def pack_charts(charts: list[Chart], atlas_size: int) -> Optional[dict[str, tuple[int, int]]]:
    """Shelf packing with a 2-texel gutter; None when the set overflows.

    Deterministic order: decreasing height, then width, then element id."""
    for c in charts:
        if c.width + 2 * GUTTER > atlas_size or c.height + 2 * GUTTER > atlas_size:
            raise ValueError(
                f"chart {c.element_id} ({c.width}x{c.height}) exceeds atlas "
                f"size {atlas_size}")
    order = sorted(charts, key=lambda c: (-c.height, -c.width, c.element_id))
    placements: dict[str, tuple[int, int]] = {}
    x = y = GUTTER
    shelf_h = 0
    for c in order:
        if x + c.width + GUTTER > atlas_size:
            y += shelf_h + GUTTER
            x = GUTTER
            shelf_h = 0
        if y + c.height + GUTTER > atlas_size:
            return None
        placements[c.element_id] = (x, y)
        x += c.width + GUTTER
        shelf_h = max(shelf_h, c.height)
    return placements


def assign_atlases(groups: dict[str, list[Chart]], store: MetaStore,
                   atlas_size: int) -> list[Atlas]:
    """Walk dungeons in progression order, packing each dungeon's charts into
    the current atlas; open a new atlas when the next dungeon no longer fits.
    Atlas membership therefore stays contiguous in progression order."""
    by_dungeon: dict[str, list[Chart]] = {}
    for gid in sorted(groups.keys()):
        for chart in groups[gid]:
            did = gid.split("/", 1)[0]
            by_dungeon.setdefault(did, []).append(chart)

    atlases: list[Atlas] = []
    current: list[Chart] = []
    current_dungeons: list[str] = []

    def flush():
        if not current_dungeons:
            return
        atlas = Atlas(f"atlas{len(atlases)}", atlas_size,
                      list(current_dungeons), list(current))
        placements = pack_charts(current, atlas_size)
        if placements is None:
            raise ValueError("internal: flushed atlas no longer packs")
        for c in current:
            c.atlas_id = atlas.id
            c.atlas_x, c.atlas_y = placements[c.element_id]
        atlases.append(atlas)

    for did in store.progression_order():
        charts = sorted(by_dungeon.get(did, []), key=lambda c: c.element_id)
        trial = current + charts
        if pack_charts(trial, atlas_size) is None:
            flush()
            current = list(charts)
            current_dungeons = [did]
            if pack_charts(current, atlas_size) is None:
                raise ValueError(f"dungeon {did} alone overflows one atlas")
        else:
            current = trial
            current_dungeons.append(did)
    flush()
    return atlases


# ---------------------------------------------------------------------------
# Light selection


def light_influence_radius(light: PointLight, cutoff: float = 0.01) -> float:
    return math.sqrt(max(light.intensity, 1e-9) / cutoff)


def select_lights(dungeon_id: str, store: MetaStore) -> list[PointLight]:
    """Own lights plus neighbor-dungeon lights whose influence sphere reaches
    this dungeon's bounding volume."""
    world = store.world
    own = [li for li in world.lights if li.dungeon == dungeon_id]
    target = world.dungeons[dungeon_id]
    reach = target.bounding_radius() + target.wall_height
    neighbors = {d for _, d in (store.neighbors_of(dungeon_id) or [])}
    out = list(own)
    for li in world.lights:
        if li.dungeon in neighbors and \
                li.position.dist(target.center) <= light_influence_radius(li) + reach:
            out.append(li)
    return sorted(out, key=lambda li: li.id)


# ---------------------------------------------------------------------------
# Crease tessellation


def _candidate_planes(world: World, elem: Element) -> list[Plane]:
    planes: list[Plane] = []
    for other_id in sorted(world.elements.keys()):
        if other_id == elem.id:
            continue
        planes.extend(world.elements[other_id].planes)
    return planes


def tessellate_for_ao(mesh: MeshBuffer, world: World, elem: Element,
                      config: BakeConfig) -> MeshBuffer:
    """Subdivide triangles lying within the crease band of another element's
    plane meeting this surface at a sharp angle (>= 30 degrees dihedral).

    In-place on the bake mesh; the surface itself is unchanged (midpoint
    subdivision), so total area is preserved exactly."""
    min_angle = math.radians(30.0)
    planes = _candidate_planes(world, elem)
    band = config.crease_band

    out_indices: list[tuple[int, int, int]] = []
    for t in range(mesh.triangle_count()):
        i, j, k = mesh.indices[t]
        tri = (mesh.positions[i], mesh.positions[j], mesh.positions[k])
        n = mesh.normals[i]
        crease = False
        for plane in planes:
            cos_d = abs(plane.normal.dot(n))
            if cos_d > math.cos(min_angle):
                continue  # nearly coplanar surfaces make no crease
            if any(abs(signed_distance(p, plane)) <= band for p in tri):
                crease = True
                break
        if crease:
            _subdivide(mesh, (i, j, k), config.subdivision_level, out_indices)
        else:
            out_indices.append((i, j, k))
    mesh.indices = out_indices
    return mesh


def _subdivide(mesh: MeshBuffer, tri: tuple[int, int, int], level: int,
               out: list[tuple[int, int, int]],
               cache: Optional[dict] = None) -> None:
    if cache is None:
        cache = {}
    if level == 0:
        out.append(tri)
        return
    i, j, k = tri

    def midpoint(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key in cache:
            return cache[key]
        p = mesh.positions[a].lerp(mesh.positions[b], 0.5)
        n = mesh.normals[a].add(mesh.normals[b])
        n = n.scale(1.0 / n.norm()) if n.norm() > 1e-12 else mesh.normals[a]
        uv = ((mesh.uvs[a][0] + mesh.uvs[b][0]) / 2.0,
              (mesh.uvs[a][1] + mesh.uvs[b][1]) / 2.0)
        idx = mesh.add_vertex(p, n, uv)
        cache[key] = idx
        return idx

    ij = midpoint(i, j)
    jk = midpoint(j, k)
    ki = midpoint(k, i)
    for sub in ((i, ij, ki), (ij, j, jk), (ki, jk, k), (ij, jk, ki)):
        _subdivide(mesh, sub, level - 1, out, cache)


# ---------------------------------------------------------------------------
# Ambient occlusion


def hemisphere_directions(normal: Vec3, count: int) -> list[Vec3]:
    """Cosine-weighted rays from a Hammersley set via the concentric-disk
    mapping; deterministic for a given (normal, count)."""
    ref = Vec3(0.0, 1.0, 0.0) if abs(normal.y) < 0.99 else Vec3(1.0, 0.0, 0.0)
    t1 = normal.cross(ref).normalized()
    t2 = normal.cross(t1)
    out = []
    for idx in range(count):
        u = (idx + 0.5) / count
        v = _radical_inverse(idx + 1)
        r = math.sqrt(u)
        phi = 2.0 * math.pi * v
        x = r * math.cos(phi)
        y = r * math.sin(phi)
        z = math.sqrt(max(0.0, 1.0 - u))
        out.append(t1.scale(x).add(t2.scale(y)).add(normal.scale(z)))
    return out


def _radical_inverse(n: int, base: int = 2) -> float:
    inv = 1.0 / base
    result = 0.0
    f = inv
    while n:
        result += (n % base) * f
        n //= base
        f *= inv
    return result


def compute_ao(point: Vec3, normal: Vec3, occluders: TriangleIndex,
               config: BakeConfig) -> float:
    """1 - fraction of cosine-weighted hemisphere rays hitting occluders
    within the configured distance.  1.0 exactly for an open hemisphere."""
    origin = point.add(normal.scale(1e-4))
    hits = 0
    for d in hemisphere_directions(normal, config.ao_rays):
        if occluders.cast(origin, d, max_t=config.ao_max_distance) is not None:
            hits += 1
    return 1.0 - hits / config.ao_rays


# ---------------------------------------------------------------------------
# Baking


def direct_light(point: Vec3, normal: Vec3, lights: list[PointLight],
                 occluders: Optional[TriangleIndex]) -> tuple[float, float, float]:
    """Sum of inverse-square Lambertian contributions with shadow rays."""
    r = g = b = 0.0
    for li in lights:
        to_light = li.position.sub(point)
        dist = to_light.norm()
        if dist < 1e-9:
            continue
        d = to_light.scale(1.0 / dist)
        lam = normal.dot(d)
        if lam <= 0.0:
            continue
        if occluders is not None:
            hit = occluders.cast(point.add(normal.scale(1e-4)), d, max_t=dist - 1e-3)
            if hit is not None:
                continue
        f = li.intensity * lam / (dist * dist)
        r += f * li.color[0]
        g += f * li.color[1]
        b += f * li.color[2]
    return r, g, b


def texel_radiance(point: Vec3, normal: Vec3, lights: list[PointLight],
                   occluders: Optional[TriangleIndex], ao: float,
                   ambient: float) -> tuple[float, float, float]:
    """The single-texel evaluator: (ambient + direct) * ao per channel."""
    r, g, b = direct_light(point, normal, lights, occluders)
    return ((ambient + r) * ao, (ambient + g) * ao, (ambient + b) * ao)


@dataclass
class BakeResult:
    atlases: list[Atlas]
    charts: list[Chart]
    vertex_ao: dict[str, list[float]]


def bake(world: World, store: MetaStore, config: BakeConfig) -> BakeResult:
    groups = group_surfaces(world, store, config)
    atlases = assign_atlases(groups, store, config.atlas_size)
    charts = [c for a in atlases for c in a.charts]

    for eid in sorted(world.elements.keys()):
        elem = world.elements[eid]
        tessellate_for_ao(world.meshes[elem.bake_mesh], world, elem, config)
    occluders = TriangleIndex(world.bake_meshes())

    vertex_ao: dict[str, list[float]] = {}
    for eid in sorted(world.elements.keys()):
        mesh = world.meshes[world.elements[eid].bake_mesh]
        vertex_ao[mesh.mesh_id] = [
            compute_ao(p, n, occluders, config)
            for p, n in zip(mesh.positions, mesh.normals)]

    lights_by_dungeon = {did: select_lights(did, store)
                         for did in world.dungeon_ids()}
    chart_by_element = {c.element_id: c for c in charts}

    for atlas in atlases:
        atlas.pixels = [0.0] * (atlas.size * atlas.size * 3)
        for chart in atlas.charts:
            elem = world.elements[chart.element_id]
            bake_mesh = world.meshes[elem.bake_mesh]
            lights = lights_by_dungeon[elem.dungeon]
            ao_vals = vertex_ao[bake_mesh.mesh_id]
            _bake_chart(atlas, chart, bake_mesh, ao_vals, lights, occluders,
                        config)
    return BakeResult(atlases, charts, vertex_ao)


def _bake_chart(atlas: Atlas, chart: Chart, bake_mesh: MeshBuffer,
                ao_vals: list[float], lights: list[PointLight],
                occluders: TriangleIndex, config: BakeConfig) -> None:
    size = atlas.size
    for face in chart.faces:
        # triangles of the tessellated mesh belonging to this face plane
        tris = _face_triangles(bake_mesh, face)
        for py in range(face.h):
            for px in range(face.w):
                u = (px + 0.5) / chart.scale
                v = (py + 0.5) / chart.scale
                point = face.origin.add(face.u_dir.scale(u)).add(face.v_dir.scale(v))
                ao = _interp_ao(point, face, tris, bake_mesh, ao_vals)
                if ao is None:
                    ao = 1.0
                r, g, b = texel_radiance(point, face.normal, lights, occluders,
                                         ao, config.ambient_floor)
                ax = chart.atlas_x + face.px + px
                ay = chart.atlas_y + face.py + py
                o = (ay * size + ax) * 3
                atlas.pixels[o] = r
                atlas.pixels[o + 1] = g
                atlas.pixels[o + 2] = b


def _face_triangles(mesh: MeshBuffer, face: ChartFace) -> list[tuple]:
    out = []
    for t in range(mesh.triangle_count()):
        i, j, k = mesh.indices[t]
        n = mesh.normals[i]
        if abs(n.dot(face.normal)) < 0.999:
            continue
        a = mesh.positions[i]
        if abs(a.sub(face.origin).dot(face.normal)) > 1e-6:
            continue
        out.append((i, j, k))
    return out


def _interp_ao(point: Vec3, face: ChartFace, tris: list[tuple],
               mesh: MeshBuffer, ao_vals: list[float]) -> Optional[float]:
    pu = point.sub(face.origin).dot(face.u_dir)
    pv = point.sub(face.origin).dot(face.v_dir)
    for (i, j, k) in tris:
        au = mesh.positions[i].sub(face.origin).dot(face.u_dir)
        av = mesh.positions[i].sub(face.origin).dot(face.v_dir)
        bu = mesh.positions[j].sub(face.origin).dot(face.u_dir)
        bv = mesh.positions[j].sub(face.origin).dot(face.v_dir)
        cu = mesh.positions[k].sub(face.origin).dot(face.u_dir)
        cv = mesh.positions[k].sub(face.origin).dot(face.v_dir)
        den = (bv - cv) * (au - cu) + (cu - bu) * (av - cv)
        if abs(den) < 1e-12:
            continue
        w0 = ((bv - cv) * (pu - cu) + (cu - bu) * (pv - cv)) / den
        w1 = ((cv - av) * (pu - cu) + (au - cu) * (pv - cv)) / den
        w2 = 1.0 - w0 - w1
        eps = -0.02
        if w0 >= eps and w1 >= eps and w2 >= eps:
            return w0 * ao_vals[i] + w1 * ao_vals[j] + w2 * ao_vals[k]
    return None


# ---------------------------------------------------------------------------
# Output


def encode_png(width: int, height: int, rgb: bytes) -> bytes:
    """Minimal deterministic RGB8 PNG encoder (fixed zlib level)."""
    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (struct.pack(">I", len(payload)) + tag + payload
                + struct.pack(">I", zlib.crc32(tag + payload)))

    raw = bytearray()
    stride = width * 3
    for y in range(height):
        raw.append(0)
        raw.extend(rgb[y * stride:(y + 1) * stride])
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(bytes(raw), 6))
            + chunk(b"IEND", b""))


def atlas_to_png(atlas: Atlas, gamma: bool = False) -> bytes:
    buf = bytearray(atlas.size * atlas.size * 3)
    for i, v in enumerate(atlas.pixels):
        v = max(0.0, min(1.0, v))
        if gamma:
            v = v ** (1.0 / 2.2)
        buf[i] = int(v * 255.0 + 0.5)
    return encode_png(atlas.size, atlas.size, bytes(buf))


def save_bake(result: BakeResult, out_dir: str, config: BakeConfig) -> None:
    import os
    os.makedirs(out_dir, exist_ok=True)
    for atlas in result.atlases:
        with open(os.path.join(out_dir, f"{atlas.id}.png"), "wb") as fp:
            fp.write(atlas_to_png(atlas, config.gamma))
    doc = {"atlases": [{"id": a.id, "size": a.size, "dungeons": a.dungeons}
                       for a in result.atlases],
           "charts": [{
               "element": c.element_id, "group": c.group_id,
               "atlas": c.atlas_id,
               "rect": [c.atlas_x, c.atlas_y, c.width, c.height],
               "texels_per_unit": c.scale,
               "faces": [{
                   "origin": [f.origin.x, f.origin.y, f.origin.z],
                   "u_dir": [f.u_dir.x, f.u_dir.y, f.u_dir.z],
                   "v_dir": [f.v_dir.x, f.v_dir.y, f.v_dir.z],
                   "rect": [f.px, f.py, f.w, f.h],
               } for f in c.faces],
           } for c in sorted(result.charts, key=lambda c: c.element_id)]}
    save_canonical(doc, os.path.join(out_dir, "charts.json"))
