"""Terrain quantization into per-dungeon layered occupancy grids.

Layer slabs tile the camera altitude band contiguously and are shared by
every dungeon (same boundaries world-wide), so per-dungeon grids align on
one lattice and can be merged for cross-dungeon camera planning.

Cell solidity is conservative box overlap, never center sampling:

    solid(cell)  <=>  cell box intersects any static element volume
                      OR the box is not fully inside the dungeon domain
                      (footprint prism union attached corridor interiors,
                      membership checked at the 8 box corners + center)

Connector openings stay open structurally: every element volume is tight
around its geometry (door slabs and stair steps really block cells, gate
trim only claims its rim), so aperture cells are empty exactly when nothing
physical occupies them.

False-solid cells only cost path optimality; false-empty cells would break
the camera no-clip guarantee, so nothing here may under-approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .geometry import Vec3, obb_intersects_aabb
from .lattice import GridFrame
from .serialization import load_json, save_canonical
from .worldgen import Connector, Dungeon, World, corridor_halves


class Cell(NamedTuple):
    layer: int
    ix: int
    iz: int


@dataclass
class LayeredGrid:
    dungeon_id: str
    frame: GridFrame
    layer_boundaries: list[float]      # len = layers + 1, ascending, global
    occupancy: list[bytearray]         # per layer, row-major iz * nx + ix; 1 = solid

    @property
    def voxel_size(self) -> float:
        return self.frame.voxel

    @property
    def layer_count(self) -> int:
        return len(self.layer_boundaries) - 1

    def layer_altitudes(self) -> list[float]:
        b = self.layer_boundaries
        return [(b[i] + b[i + 1]) / 2.0 for i in range(len(b) - 1)]

    def slab_thickness(self) -> float:
        return self.layer_boundaries[1] - self.layer_boundaries[0]

    def in_bounds(self, cell: Cell) -> bool:
        return (0 <= cell.layer < self.layer_count
                and 0 <= cell.ix < self.frame.nx
                and 0 <= cell.iz < self.frame.nz)

    def is_solid(self, cell: Cell) -> bool:
        if not self.in_bounds(cell):
            return True
        return self.occupancy[cell.layer][cell.iz * self.frame.nx + cell.ix] != 0

    def is_empty(self, cell: Cell) -> bool:
        return not self.is_solid(cell)

    def solid_count(self) -> int:
        return sum(sum(layer) for layer in self.occupancy)


def cell_of(grid: LayeredGrid, p: Vec3) -> Optional[Cell]:
    """Cell containing p; the layer is the nearest layer altitude."""
    if p.y < grid.layer_boundaries[0] - 1e-9 or p.y > grid.layer_boundaries[-1] + 1e-9:
        return None
    xz = grid.frame.cell_of(p.x, p.z)
    if xz is None:
        return None
    alts = grid.layer_altitudes()
    layer = min(range(len(alts)), key=lambda i: abs(alts[i] - p.y))
    return Cell(layer, xz[0], xz[1])


def world_of(grid: LayeredGrid, cell: Cell) -> Vec3:
    x, z = grid.frame.center(cell.ix, cell.iz)
    return Vec3(x, grid.layer_altitudes()[cell.layer], z)


def layer_boundaries_for(world: World, layers: int) -> list[float]:
    """Global slabs spanning the camera altitude band of the whole world,
    plus one guard slab below and above.

    Guard slabs quantize the space a camera sphere can graze when riding the
    outermost in-band layers; the clearance mask never marks them navigable."""
    lo, hi = world.config.style.camera_altitude_range
    floor_min, floor_max = world.floor_range()
    band_lo = floor_min + lo
    band_hi = floor_max + hi
    slab = (band_hi - band_lo) / layers
    return [band_lo + slab * i for i in range(-1, layers + 2)]


def _domain_contains(dungeon: Dungeon, conns: list[Connector], p: Vec3) -> bool:
    if dungeon.contains(p, eps=1e-9):
        return True
    for conn in conns:
        if conn.contains(p, eps=1e-9):
            return True
    return False


def quantize_dungeon(world: World, dungeon: Dungeon, voxel_size: float,
                     layer_boundaries: list[float]) -> LayeredGrid:
    """Conservative occupancy for one dungeon (plus its corridor halves)."""
    fp = dungeon.footprint_xz()
    ext_x = max(x for x, _ in fp) - min(x for x, _ in fp)
    ext_z = max(z for _, z in fp) - min(z for _, z in fp)
    if voxel_size >= min(ext_x, ext_z):
        raise ValueError(
            f"{dungeon.id}: voxel size {voxel_size} exceeds footprint extent")

    frame = _frame_for(world, dungeon, voxel_size)
    conns = [c for c, _, _ in corridor_halves(world, dungeon.id)]

    # candidate elements per column, prefiltered by their obb's xz bounds
    nx, nz = frame.nx, frame.nz
    candidates: list[list] = [[] for _ in range(nx * nz)]
    pad = voxel_size  # one-cell slack around each element footprint
    for eid in sorted(world.elements.keys()):
        elem = world.elements[eid]
        corners = elem.volume.obb.corners()
        min_x = min(c.x for c in corners) - pad
        max_x = max(c.x for c in corners) + pad
        min_z = min(c.z for c in corners) - pad
        max_z = max(c.z for c in corners) + pad
        ix0 = max(0, math.floor((min_x - frame.origin_x) / voxel_size))
        ix1 = min(nx - 1, math.floor((max_x - frame.origin_x) / voxel_size))
        iz0 = max(0, math.floor((min_z - frame.origin_z) / voxel_size))
        iz1 = min(nz - 1, math.floor((max_z - frame.origin_z) / voxel_size))
        if ix0 > ix1 or iz0 > iz1:
            continue
        for iz in range(iz0, iz1 + 1):
            for ix in range(ix0, ix1 + 1):
                candidates[iz * nx + ix].append(elem.volume)

    layers = len(layer_boundaries) - 1
    occupancy = [bytearray(nx * nz) for _ in range(layers)]
    half_xz = voxel_size / 2.0
    for layer in range(layers):
        y0, y1 = layer_boundaries[layer], layer_boundaries[layer + 1]
        yc = (y0 + y1) / 2.0
        half = Vec3(half_xz, (y1 - y0) / 2.0, half_xz)
        occ = occupancy[layer]
        for iz in range(nz):
            for ix in range(nx):
                x, z = frame.center(ix, iz)
                center = Vec3(x, yc, z)
                if not _box_in_domain(dungeon, conns, x, z, y0, y1, half_xz):
                    occ[iz * nx + ix] = 1
                    continue
                for vol in candidates[iz * nx + ix]:
                    s = vol.sphere
                    dx = s.center.x - x
                    dy = s.center.y - yc
                    dz = s.center.z - z
                    reach = s.radius + half_xz + half.y
                    if dx * dx + dy * dy + dz * dz > reach * reach:
                        continue
                    if obb_intersects_aabb(vol.obb, center, half):
                        occ[iz * nx + ix] = 1
                        break
    return LayeredGrid(dungeon.id, frame, list(layer_boundaries), occupancy)


# surface volumes straddle their plane by half this; aperture keeps clear of them
APERTURE_SHRINK = 0.17


def aperture_contains(conn: Connector, p: Vec3, shrink: float = APERTURE_SHRINK) -> bool:
    """Point strictly inside the connector's open passage, clear of every
    surface slab (walls, floor profile, ceiling) by `shrink`.

    The passage extends past both wall planes so ground agents can cross the
    carved opening; gate apertures taper with height to stay inside the
    tilted arch walls."""
    s = conn.station_of(p)
    if s < -1.2 or s > conn.length + 1.2:
        return False
    s_c = min(max(s, 0.0), conn.length)
    support = conn.support_altitude(s_c)
    ceiling = conn.ceiling_altitude(s)
    if not (support + shrink < p.y < ceiling - shrink):
        return False
    half_w = conn.width_at(s) / 2.0
    if conn.kind == "gate":
        from .worldgen import GATE_TAPER
        t = (p.y - support) / max(ceiling - support, 1e-9)
        half_w *= 1.0 + (GATE_TAPER - 1.0) * t
    return abs(conn.lateral_of(p)) < half_w - shrink


def _box_in_aperture(conns: list[Connector], x: float, z: float,
                     y0: float, y1: float, h: float) -> bool:
    for conn in conns:
        inside = True
        for px, pz in ((x - h, z - h), (x - h, z + h), (x + h, z - h),
                       (x + h, z + h), (x, z)):
            for py in (y0, y1):
                if not aperture_contains(conn, Vec3(px, py, pz)):
                    inside = False
                    break
            if not inside:
                break
        if inside:
            return True
    return False


def _frame_for(world: World, dungeon: Dungeon, voxel: float) -> GridFrame:
    # shares the lattice construction with the height map domain
    from .worldgen import _domain_frame
    return _domain_frame(world, dungeon, voxel)


def _box_in_domain(dungeon: Dungeon, conns: list[Connector],
                   x: float, z: float, y0: float, y1: float, h: float) -> bool:
    for px, pz in ((x - h, z - h), (x - h, z + h), (x + h, z - h), (x + h, z + h),
                   (x, z)):
        for py in (y0, y1):
            if not _domain_contains(dungeon, conns, Vec3(px, py, pz)):
                return False
    return True


def quantize_world(world: World, voxel_size: Optional[float] = None,
                   layers: Optional[int] = None) -> dict[str, LayeredGrid]:
    style = world.config.style
    voxel = style.voxel_size if voxel_size is None else voxel_size
    n_layers = style.grid_layers if layers is None else layers
    boundaries = layer_boundaries_for(world, n_layers)
    return {did: quantize_dungeon(world, world.dungeons[did], voxel, boundaries)
            for did in world.dungeon_ids()}


# ---------------------------------------------------------------------------
# Merged view for cross-dungeon planning


def merge_grids(grids: dict[str, LayeredGrid]) -> LayeredGrid:
    """Union of the per-dungeon grids on the shared lattice.

    A cell is empty when any member grid marks it empty: each grid is
    authoritative inside its own domain and all-solid elsewhere."""
    gs = [grids[k] for k in sorted(grids.keys())]
    voxel = gs[0].voxel_size
    boundaries = gs[0].layer_boundaries
    for g in gs:
        if abs(g.voxel_size - voxel) > 1e-9 or \
                any(abs(a - b) > 1e-9 for a, b in zip(g.layer_boundaries, boundaries)):
            raise ValueError("grids must share voxel size and layer boundaries")
    min_x = min(g.frame.origin_x for g in gs)
    min_z = min(g.frame.origin_z for g in gs)
    max_x = max(g.frame.origin_x + g.frame.nx * voxel for g in gs)
    max_z = max(g.frame.origin_z + g.frame.nz * voxel for g in gs)
    frame = GridFrame.from_bbox(min_x, min_z, max_x, max_z, voxel)
    layers = len(boundaries) - 1
    occ = [bytearray([1]) * (frame.nx * frame.nz) for _ in range(layers)]
    for g in gs:
        off_x = round((g.frame.origin_x - frame.origin_x) / voxel)
        off_z = round((g.frame.origin_z - frame.origin_z) / voxel)
        for layer in range(layers):
            src = g.occupancy[layer]
            dst = occ[layer]
            for iz in range(g.frame.nz):
                row = iz * g.frame.nx
                wrow = (iz + off_z) * frame.nx + off_x
                for ix in range(g.frame.nx):
                    if src[row + ix] == 0:
                        dst[wrow + ix] = 0
    return LayeredGrid("world", frame, list(boundaries), occ)


# ---------------------------------------------------------------------------
# Clearance (navigable) masks and line of sight


def clearance_mask(grid, radius: float) -> list[bytearray]:
    """Per-layer navigability for a camera sphere whose center rides the slab
    center planes (rest positions and inter-layer sweeps both stay between
    adjacent center planes).

    A cell is navigable when no solid cell box lies within `radius` of a
    sphere centered anywhere on the cell's center plane: horizontal gaps are
    whole-voxel gaps, the vertical gap to an adjacent slab is half a slab.
    Guard layers (outermost) are never navigable, and the radius must not
    out-reach the slab above/below the neighbors (radius <= 1.5 slabs)."""
    voxel = grid.voxel_size
    slab = grid.slab_thickness()
    if radius > 1.5 * slab + 1e-9:
        raise ValueError(
            f"collision radius {radius} exceeds 1.5x slab thickness {slab}; "
            f"use more grid layers or a smaller camera sphere")
    offsets = []
    reach_xz = int(math.ceil(radius / voxel)) + 1
    for dl in (-1, 0, 1):
        gy = 0.0 if dl == 0 else slab / 2.0
        for dx in range(-reach_xz, reach_xz + 1):
            for dz in range(-reach_xz, reach_xz + 1):
                gx = max(0, abs(dx) - 1) * voxel
                gz = max(0, abs(dz) - 1) * voxel
                if math.sqrt(gx * gx + gy * gy + gz * gz) < radius:
                    offsets.append((dl, dx, dz))
    nx, nz = grid.frame.nx, grid.frame.nz
    layers = grid.layer_count
    masks = [bytearray(nx * nz) for _ in range(layers)]
    for layer in range(1, layers - 1):
        for iz in range(nz):
            for ix in range(nx):
                if grid.is_solid(Cell(layer, ix, iz)):
                    continue
                ok = 1
                for dl, dx, dz in offsets:
                    if grid.is_solid(Cell(layer + dl, ix + dx, iz + dz)):
                        ok = 0
                        break
                masks[layer][iz * nx + ix] = ok
    return masks


def supercover_cells(a: Cell, b: Cell) -> list[Cell]:
    """2-D supercover cells between two same-layer cell centers, including
    both diagonal neighbors at exact corner crossings."""
    if a.layer != b.layer:
        raise ValueError("line of sight requires a single layer")
    cells = [a]
    x0, z0 = a.ix + 0.5, a.iz + 0.5
    x1, z1 = b.ix + 0.5, b.iz + 0.5
    dx, dz = x1 - x0, z1 - z0
    ix, iz = a.ix, a.iz
    sx = 1 if dx > 0 else -1
    sz = 1 if dz > 0 else -1
    tmax_x = ((ix + (sx > 0)) - x0) / dx if dx != 0 else math.inf
    tmax_z = ((iz + (sz > 0)) - z0) / dz if dz != 0 else math.inf
    tdx = abs(1.0 / dx) if dx != 0 else math.inf
    tdz = abs(1.0 / dz) if dz != 0 else math.inf
    while (ix, iz) != (b.ix, b.iz):
        if abs(tmax_x - tmax_z) < 1e-12:
            # exact corner: include both side cells then step diagonally
            cells.append(Cell(a.layer, ix + sx, iz))
            cells.append(Cell(a.layer, ix, iz + sz))
            ix += sx
            iz += sz
            tmax_x += tdx
            tmax_z += tdz
        elif tmax_x < tmax_z:
            ix += sx
            tmax_x += tdx
        else:
            iz += sz
            tmax_z += tdz
        cells.append(Cell(a.layer, ix, iz))
        if len(cells) > 4 * (abs(b.ix - a.ix) + abs(b.iz - a.iz) + 2):
            raise RuntimeError("supercover traversal runaway")
    return cells


def line_of_sight(grid, a: Cell, b: Cell, mask: Optional[list[bytearray]] = None) -> bool:
    """True when every supercover cell between a and b is empty (or navigable
    when a clearance mask is supplied)."""
    for cell in supercover_cells(a, b):
        if mask is not None:
            if not grid.in_bounds(cell) or \
                    mask[cell.layer][cell.iz * grid.frame.nx + cell.ix] == 0:
                return False
        elif grid.is_solid(cell):
            return False
    return True


# ---------------------------------------------------------------------------
# Grid file io (run-length encoded occupancy)


def _rle_encode(data: bytearray) -> list[int]:
    out: list[int] = []
    i = 0
    n = len(data)
    while i < n:
        v = data[i]
        j = i
        while j < n and data[j] == v:
            j += 1
        out.extend((j - i, v))
        i = j
    return out


def _rle_decode(runs: list[int], expect: int) -> bytearray:
    out = bytearray()
    for i in range(0, len(runs), 2):
        out.extend(bytes([runs[i + 1]]) * runs[i])
    if len(out) != expect:
        raise ValueError("grid occupancy rle length mismatch")
    return out


def save_grids(grids: dict[str, LayeredGrid], path: str) -> None:
    gs = [grids[k] for k in sorted(grids.keys())]
    doc = {
        "meta": {
            "voxel_size": gs[0].voxel_size,
            "layer_boundaries": gs[0].layer_boundaries,
        },
        "grids": [{
            "dungeon": g.dungeon_id,
            "frame": {"origin_x": g.frame.origin_x, "origin_z": g.frame.origin_z,
                      "voxel": g.frame.voxel, "nx": g.frame.nx, "nz": g.frame.nz},
            "occupancy": [_rle_encode(layer) for layer in g.occupancy],
        } for g in gs],
    }
    save_canonical(doc, path)


def load_grids(path: str) -> dict[str, LayeredGrid]:
    doc = load_json(path)
    boundaries = [float(b) for b in doc["meta"]["layer_boundaries"]]
    out: dict[str, LayeredGrid] = {}
    for g in doc["grids"]:
        f = g["frame"]
        frame = GridFrame(float(f["origin_x"]), float(f["origin_z"]),
                          float(f["voxel"]), int(f["nx"]), int(f["nz"]))
        occ = [_rle_decode(runs, frame.nx * frame.nz) for runs in g["occupancy"]]
        out[g["dungeon"]] = LayeredGrid(g["dungeon"], frame, boundaries, occ)
    return out
