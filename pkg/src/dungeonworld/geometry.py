"""Geometric primitives and predicates shared by every subsystem.

Pure functions over small immutable value types.  Everything here is plain
Python float math (no numpy) so single queries stay cheap on the hot
simulation path; batched oracles live in the test suite.

Conventions: y is up, world units are meters-scale.  Coplanarity and
containment use a 1e-6 tolerance, unit-length checks 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

COPLANAR_EPS = 1e-6
UNIT_EPS = 1e-9
DEGENERATE_AREA = 1e-10
RAY_MIN_T = 1e-6


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def add(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x + o.x, self.y + o.y, self.z + o.z)

    def sub(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x - o.x, self.y - o.y, self.z - o.z)

    def scale(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, o: "Vec3") -> float:
        return self.x * o.x + self.y * o.y + self.z * o.z

    def cross(self, o: "Vec3") -> "Vec3":
        return Vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n < UNIT_EPS:
            raise ValueError("cannot normalize a near-zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def dist(self, o: "Vec3") -> float:
        dx = self.x - o.x
        dy = self.y - o.y
        dz = self.z - o.z
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    def lerp(self, o: "Vec3", t: float) -> "Vec3":
        return Vec3(
            self.x + (o.x - self.x) * t,
            self.y + (o.y - self.y) * t,
            self.z + (o.z - self.z) * t,
        )

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)


ZERO = Vec3(0.0, 0.0, 0.0)
UP = Vec3(0.0, 1.0, 0.0)

# Plane roles used across the world metadata.
PLANE_ROLES = (
    "wall", "floor", "ceiling", "step", "base", "transition", "cross", "side", "other",
)


@dataclass(frozen=True)
class Plane:
    """Oriented plane: points with dot(normal, p) - offset >= 0 are in front."""

    normal: Vec3
    offset: float
    role: str = "other"

    def __post_init__(self) -> None:
        n = self.normal.norm()
        if abs(n - 1.0) > 1e-7:
            raise ValueError(f"plane normal not unit length: |n|={n}")
        if self.role not in PLANE_ROLES:
            raise ValueError(f"unknown plane role {self.role!r}")

    @staticmethod
    def from_point_normal(point: Vec3, normal: Vec3, role: str = "other") -> "Plane":
        n = normal.normalized()
        return Plane(n, n.dot(point), role)

    def point_on(self) -> Vec3:
        return self.normal.scale(self.offset)

    def flipped(self) -> "Plane":
        return Plane(self.normal.scale(-1.0), -self.offset, self.role)


def signed_distance(p: Vec3, pl: Plane) -> float:
    """Signed distance of p to the plane; positive on the normal side."""
    return pl.normal.dot(p) - pl.offset


@dataclass(frozen=True)
class Sphere:
    center: Vec3
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise ValueError("sphere radius must be > 0")


@dataclass(frozen=True)
class Obb:
    """Oriented box: center, half extents and three orthonormal axes."""

    center: Vec3
    half_extents: Vec3
    axes: tuple[Vec3, Vec3, Vec3]

    def __post_init__(self) -> None:
        if min(self.half_extents) <= 0.0:
            raise ValueError("obb half extents must be > 0")
        a, b, c = self.axes
        for v in (a, b, c):
            if abs(v.norm() - 1.0) > 1e-7:
                raise ValueError("obb axes must be unit length")
        if max(abs(a.dot(b)), abs(b.dot(c)), abs(a.dot(c))) > 1e-7:
            raise ValueError("obb axes must be orthogonal")

    @staticmethod
    def axis_aligned(center: Vec3, half_extents: Vec3) -> "Obb":
        return Obb(center, half_extents, (Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)))

    def corners(self) -> list[Vec3]:
        out = []
        hx, hy, hz = self.half_extents
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                for sz in (-1.0, 1.0):
                    p = self.center
                    p = p.add(self.axes[0].scale(sx * hx))
                    p = p.add(self.axes[1].scale(sy * hy))
                    p = p.add(self.axes[2].scale(sz * hz))
                    out.append(p)
        return out

    def contains_point(self, p: Vec3, eps: float = 0.0) -> bool:
        d = p.sub(self.center)
        for axis, h in zip(self.axes, self.half_extents):
            if abs(d.dot(axis)) > h + eps:
                return False
        return True


@dataclass(frozen=True)
class BoundingVolume:
    """Sphere + OBB composite; the sphere must fully contain the box."""

    sphere: Sphere
    obb: Obb

    def __post_init__(self) -> None:
        reach = self.obb.center.dist(self.sphere.center) + Vec3(*self.obb.half_extents).norm()
        if reach > self.sphere.radius + 1e-6:
            raise ValueError("obb not contained in sphere")

    @staticmethod
    def from_obb(obb: Obb) -> "BoundingVolume":
        r = Vec3(*obb.half_extents).norm()
        return BoundingVolume(Sphere(obb.center, r), obb)

    def contains_point(self, p: Vec3, eps: float = 0.0) -> bool:
        if p.dist(self.sphere.center) > self.sphere.radius + eps:
            return False
        return self.obb.contains_point(p, eps)


def sphere_intersects_sphere(a: Sphere, b: Sphere) -> bool:
    return a.center.dist(b.center) <= a.radius + b.radius


def obb_intersects_obb(a: Obb, b: Obb) -> bool:
    """Separating-axis test over the 15 candidate axes of two oriented boxes."""
    axes: list[Vec3] = list(a.axes) + list(b.axes)
    for i in range(3):
        for j in range(3):
            c = a.axes[i].cross(b.axes[j])
            n = c.norm()
            if n > UNIT_EPS:
                axes.append(c.scale(1.0 / n))
    d = b.center.sub(a.center)
    for axis in axes:
        ra = sum(h * abs(axis.dot(ax)) for h, ax in zip(a.half_extents, a.axes))
        rb = sum(h * abs(axis.dot(ax)) for h, ax in zip(b.half_extents, b.axes))
        if abs(axis.dot(d)) > ra + rb:
            return False
    return True


def intersects(a: BoundingVolume, b: BoundingVolume) -> bool:
    """Composite volume overlap: cheap sphere reject first, then OBB SAT."""
    if not sphere_intersects_sphere(a.sphere, b.sphere):
        return False
    return obb_intersects_obb(a.obb, b.obb)


def obb_intersects_aabb(obb: Obb, center: Vec3, half: Vec3) -> bool:
    """SAT specialized for one axis-aligned box (hot path of voxelization).

    Same predicate as obb_intersects_obb against an identity-axes box, with
    the classic 15-axis formulation unrolled in the box frame.
    """
    # R[i][j] = world i-component of obb axis j; t = obb center in box frame
    b0, b1, b2 = obb.axes
    r = ((b0.x, b1.x, b2.x), (b0.y, b1.y, b2.y), (b0.z, b1.z, b2.z))
    ar = [[abs(r[i][j]) + 1e-12 for j in range(3)] for i in range(3)]
    t = (obb.center.x - center.x, obb.center.y - center.y, obb.center.z - center.z)
    a = (half.x, half.y, half.z)
    b = (obb.half_extents.x, obb.half_extents.y, obb.half_extents.z)

    for i in range(3):
        if abs(t[i]) > a[i] + b[0] * ar[i][0] + b[1] * ar[i][1] + b[2] * ar[i][2]:
            return False
    for j in range(3):
        tj = t[0] * r[0][j] + t[1] * r[1][j] + t[2] * r[2][j]
        if abs(tj) > b[j] + a[0] * ar[0][j] + a[1] * ar[1][j] + a[2] * ar[2][j]:
            return False
    # cross products e_i x b_j
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            ra = a[i1] * ar[i2][j] + a[i2] * ar[i1][j]
            rb = b[j1] * ar[i][j2] + b[j2] * ar[i][j1]
            tt = abs(t[i2] * r[i1][j] - t[i1] * r[i2][j])
            if tt > ra + rb:
                return False
    return True


def sphere_intersects_obb(s: Sphere, box: Obb) -> bool:
    d = s.center.sub(box.center)
    # Clamp the center into the box frame; compare to radius.
    q = 0.0
    for axis, h in zip(box.axes, box.half_extents):
        t = d.dot(axis)
        t = max(-h, min(h, t)) - t
        q += t * t
    return q <= s.radius * s.radius


def sphere_intersects_volume(s: Sphere, v: BoundingVolume) -> bool:
    if not sphere_intersects_sphere(s, v.sphere):
        return False
    return sphere_intersects_obb(s, v.obb)


@dataclass(frozen=True)
class ConvexPolygon3:
    """Planar convex polygon, counter-clockwise about its plane normal.

    The empty polygon is the canonical closed/degenerate result.
    """

    vertices: tuple[Vec3, ...] = ()

    @property
    def empty(self) -> bool:
        return len(self.vertices) == 0

    def plane_normal(self) -> Vec3:
        if len(self.vertices) < 3:
            raise ValueError("degenerate polygon has no normal")
        # Newell's method: stable for near-collinear leading vertices.
        nx = ny = nz = 0.0
        vs = self.vertices
        for i, a in enumerate(vs):
            b = vs[(i + 1) % len(vs)]
            nx += (a.y - b.y) * (a.z + b.z)
            ny += (a.z - b.z) * (a.x + b.x)
            nz += (a.x - b.x) * (a.y + b.y)
        return Vec3(nx, ny, nz).normalized()

    def area(self) -> float:
        if len(self.vertices) < 3:
            return 0.0
        n = self.plane_normal()
        total = ZERO
        o = self.vertices[0]
        for a, b in zip(self.vertices[1:], self.vertices[2:]):
            total = total.add(a.sub(o).cross(b.sub(o)))
        return 0.5 * abs(total.dot(n))

    def centroid(self) -> Vec3:
        if self.empty:
            raise ValueError("empty polygon has no centroid")
        acc = ZERO
        for v in self.vertices:
            acc = acc.add(v)
        return acc.scale(1.0 / len(self.vertices))


EMPTY_POLYGON = ConvexPolygon3()


def _normalize_clip_result(verts: list[Vec3]) -> ConvexPolygon3:
    # Drop duplicate consecutive vertices produced by edge-on-plane cases.
    out: list[Vec3] = []
    for v in verts:
        if not out or v.dist(out[-1]) > 1e-9:
            out.append(v)
    if len(out) >= 2 and out[0].dist(out[-1]) <= 1e-9:
        out.pop()
    poly = ConvexPolygon3(tuple(out))
    if len(out) < 3 or poly.area() < DEGENERATE_AREA:
        return EMPTY_POLYGON
    return poly


def clip_polygon(poly: ConvexPolygon3, pl: Plane) -> ConvexPolygon3:
    """Sutherland-Hodgman clip of a convex polygon against one half-space.

    Keeps the side with signed_distance >= 0; winding is preserved.
    """
    if poly.empty:
        return EMPTY_POLYGON
    verts = poly.vertices
    dists = [signed_distance(v, pl) for v in verts]
    if all(d >= -COPLANAR_EPS for d in dists):
        return poly
    if all(d <= COPLANAR_EPS for d in dists):
        return EMPTY_POLYGON
    out: list[Vec3] = []
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        da, db = dists[i], dists[(i + 1) % n]
        if da >= 0.0:
            out.append(a)
            if db < 0.0:
                out.append(a.lerp(b, da / (da - db)))
        elif db > 0.0:
            out.append(a.lerp(b, da / (da - db)))
    return _normalize_clip_result(out)


# ---------------------------------------------------------------------------
# Triangle meshes


@dataclass
class MeshBuffer:
    """Indexed triangle mesh tagged with a category and owning dungeon."""

    mesh_id: str
    category: str
    dungeon: str
    positions: list[Vec3] = field(default_factory=list)
    normals: list[Vec3] = field(default_factory=list)
    uvs: list[tuple[float, float]] = field(default_factory=list)
    indices: list[tuple[int, int, int]] = field(default_factory=list)

    def add_vertex(self, p: Vec3, n: Vec3, uv: tuple[float, float] = (0.0, 0.0)) -> int:
        self.positions.append(p)
        self.normals.append(n)
        self.uvs.append(uv)
        return len(self.positions) - 1

    def add_triangle(self, i: int, j: int, k: int) -> None:
        self.indices.append((i, j, k))

    def add_quad(self, a: Vec3, b: Vec3, c: Vec3, d: Vec3, normal: Vec3,
                 uvs: Optional[Sequence[tuple[float, float]]] = None) -> None:
        """Append quad a-b-c-d (counter-clockwise seen from the normal side)."""
        uvq = uvs if uvs is not None else ((0, 0), (1, 0), (1, 1), (0, 1))
        i0 = self.add_vertex(a, normal, uvq[0])
        i1 = self.add_vertex(b, normal, uvq[1])
        i2 = self.add_vertex(c, normal, uvq[2])
        i3 = self.add_vertex(d, normal, uvq[3])
        self.add_triangle(i0, i1, i2)
        self.add_triangle(i0, i2, i3)

    def triangle(self, t: int) -> tuple[Vec3, Vec3, Vec3]:
        i, j, k = self.indices[t]
        return self.positions[i], self.positions[j], self.positions[k]

    def triangle_count(self) -> int:
        return len(self.indices)

    def surface_area(self) -> float:
        total = 0.0
        for t in range(len(self.indices)):
            a, b, c = self.triangle(t)
            total += 0.5 * b.sub(a).cross(c.sub(a)).norm()
        return total

    def validate(self) -> None:
        nv = len(self.positions)
        for tri in self.indices:
            for idx in tri:
                if not (0 <= idx < nv):
                    raise ValueError(f"mesh {self.mesh_id}: index {idx} out of range")
        for t in range(len(self.indices)):
            a, b, c = self.triangle(t)
            if 0.5 * b.sub(a).cross(c.sub(a)).norm() <= 1e-12:
                raise ValueError(f"mesh {self.mesh_id}: degenerate triangle {t}")


class RayHit(NamedTuple):
    t: float
    mesh_id: str
    triangle: int


def ray_triangle(origin: Vec3, direction: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Optional[float]:
    """Moller-Trumbore; returns t > RAY_MIN_T or None. Double-sided."""
    e1 = b.sub(a)
    e2 = c.sub(a)
    h = direction.cross(e2)
    det = e1.dot(h)
    if abs(det) < 1e-12:
        return None
    inv = 1.0 / det
    s = origin.sub(a)
    u = s.dot(h) * inv
    if u < -1e-9 or u > 1.0 + 1e-9:
        return None
    q = s.cross(e1)
    v = direction.dot(q) * inv
    if v < -1e-9 or u + v > 1.0 + 1e-9:
        return None
    t = e2.dot(q) * inv
    if t <= RAY_MIN_T:
        return None
    return t


class TriangleIndex:
    """Uniform-grid acceleration structure over a set of mesh buffers.

    Cells index triangles by their xz bounding rectangle; queries walk the
    2-D cells crossed by the ray and test member triangles.  Falls back to a
    full scan for vertical rays.
    """

    def __init__(self, meshes: Iterable[MeshBuffer], cell: float = 2.0):
        self.cell = cell
        self.tris: list[tuple[Vec3, Vec3, Vec3, str, int]] = []
        for m in meshes:
            for t in range(m.triangle_count()):
                a, b, c = m.triangle(t)
                self.tris.append((a, b, c, m.mesh_id, t))
        self.grid: dict[tuple[int, int], list[int]] = {}
        self.min_x = self.min_z = math.inf
        self.max_x = self.max_z = -math.inf
        for n, (a, b, c, _, _) in enumerate(self.tris):
            lo_x, hi_x = min(a.x, b.x, c.x), max(a.x, b.x, c.x)
            lo_z, hi_z = min(a.z, b.z, c.z), max(a.z, b.z, c.z)
            self.min_x = min(self.min_x, lo_x)
            self.max_x = max(self.max_x, hi_x)
            self.min_z = min(self.min_z, lo_z)
            self.max_z = max(self.max_z, hi_z)
            for ix in range(math.floor(lo_x / cell), math.floor(hi_x / cell) + 1):
                for iz in range(math.floor(lo_z / cell), math.floor(hi_z / cell) + 1):
                    self.grid.setdefault((ix, iz), []).append(n)

    def _clip_to_bounds(self, origin: Vec3, direction: Vec3,
                        max_t: float) -> Optional[tuple[float, float]]:
        """Parameter window where the ray overlaps the indexed xz extent."""
        t0, t1 = 0.0, max_t
        pad = self.cell
        for o, d, lo, hi in ((origin.x, direction.x, self.min_x - pad, self.max_x + pad),
                             (origin.z, direction.z, self.min_z - pad, self.max_z + pad)):
            if abs(d) < 1e-12:
                if not (lo <= o <= hi):
                    return None
                continue
            ta = (lo - o) / d
            tb = (hi - o) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return None
        return t0, t1

    def _candidates(self, origin: Vec3, direction: Vec3, max_t: float) -> Iterable[int]:
        if not self.tris:
            return
        window = self._clip_to_bounds(origin, direction, max_t)
        if window is None:
            return
        t0, t1 = window
        horiz = math.hypot(direction.x, direction.z)
        if horiz < 1e-9:
            ix = math.floor(origin.x / self.cell)
            iz = math.floor(origin.z / self.cell)
            for dix in (-1, 0, 1):
                for diz in (-1, 0, 1):
                    yield from self.grid.get((ix + dix, iz + diz), ())
            return
        seen: set[int] = set()
        steps = int((t1 - t0) * horiz / self.cell) + 2
        for k in range(steps + 1):
            t = min(t1, t0 + k * self.cell / horiz)
            ix = math.floor((origin.x + direction.x * t) / self.cell)
            iz = math.floor((origin.z + direction.z * t) / self.cell)
            for dix in (-1, 0, 1):
                for diz in (-1, 0, 1):
                    for n in self.grid.get((ix + dix, iz + diz), ()):
                        if n not in seen:
                            seen.add(n)
                            yield n

    def cast(self, origin: Vec3, direction: Vec3, max_t: float = 1e9) -> Optional[RayHit]:
        best: Optional[RayHit] = None
        for n in self._candidates(origin, direction, max_t):
            a, b, c, mesh_id, tri = self.tris[n]
            t = ray_triangle(origin, direction, a, b, c)
            if t is not None and t <= max_t and (best is None or t < best.t):
                best = RayHit(t, mesh_id, tri)
        return best


def ray_cast(origin: Vec3, direction: Vec3, meshes: Iterable[MeshBuffer],
             max_t: float = 1e9) -> Optional[RayHit]:
    """Nearest ray hit over all triangles of the given meshes."""
    best: Optional[RayHit] = None
    for m in meshes:
        for t_idx in range(m.triangle_count()):
            a, b, c = m.triangle(t_idx)
            t = ray_triangle(origin, direction, a, b, c)
            if t is not None and t <= max_t and (best is None or t < best.t):
                best = RayHit(t, m.mesh_id, t_idx)
    return best


# ---------------------------------------------------------------------------
# 2-D helpers for footprints (xz plane)


def point_in_convex_2d(x: float, z: float, poly_xz: Sequence[tuple[float, float]],
                       eps: float = 1e-9) -> bool:
    """Point-in-polygon for a counter-clockwise convex polygon in the xz plane."""
    n = len(poly_xz)
    if n < 3:
        return False
    for i in range(n):
        ax, az = poly_xz[i]
        bx, bz = poly_xz[(i + 1) % n]
        # CCW about +y: interior points satisfy (edge x dp).y >= 0 on every edge.
        cross = (bz - az) * (x - ax) - (bx - ax) * (z - az)
        if cross < -eps:
            return False
    return True


def convex_polygon_2d_area(poly_xz: Sequence[tuple[float, float]]) -> float:
    total = 0.0
    n = len(poly_xz)
    for i in range(n):
        ax, az = poly_xz[i]
        bx, bz = poly_xz[(i + 1) % n]
        total += ax * bz - bx * az
    return 0.5 * abs(total)
