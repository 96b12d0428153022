"""Shared 2-D cell lattice math.

Every gridded artifact (occupancy layers, height maps, singularity tables)
snaps its origin to multiples of the voxel size so cells of different
dungeons land on one world-aligned lattice and can be merged by index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


def snap_down(v: float, step: float) -> float:
    return math.floor(v / step) * step


def snap_up(v: float, step: float) -> float:
    return math.ceil(v / step) * step


@dataclass(frozen=True)
class GridFrame:
    """Axis-aligned xz cell frame: origin is the min corner of cell (0, 0)."""

    origin_x: float
    origin_z: float
    voxel: float
    nx: int
    nz: int

    @staticmethod
    def from_bbox(min_x: float, min_z: float, max_x: float, max_z: float,
                  voxel: float, pad_cells: int = 0) -> "GridFrame":
        ox = snap_down(min_x, voxel) - pad_cells * voxel
        oz = snap_down(min_z, voxel) - pad_cells * voxel
        nx = int(round((snap_up(max_x, voxel) - ox) / voxel)) + pad_cells
        nz = int(round((snap_up(max_z, voxel) - oz) / voxel)) + pad_cells
        return GridFrame(ox, oz, voxel, max(nx, 1), max(nz, 1))

    def cell_of(self, x: float, z: float) -> Optional[tuple[int, int]]:
        ix = math.floor((x - self.origin_x) / self.voxel)
        iz = math.floor((z - self.origin_z) / self.voxel)
        if 0 <= ix < self.nx and 0 <= iz < self.nz:
            return ix, iz
        return None

    def center(self, ix: int, iz: int) -> tuple[float, float]:
        return (self.origin_x + (ix + 0.5) * self.voxel,
                self.origin_z + (iz + 0.5) * self.voxel)

    def cell_count(self) -> int:
        return self.nx * self.nz
