"""Coarse boolean occupancy grid over a set of meshes and its top-height layer."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .mesh_io import Aabb, MeshError, TriangleMesh, mesh_bounds

DEFAULT_CELL_BUDGET = 200_000_000

# Tie-break for geometry lying exactly on cell faces, in cell units: each
# triangle is shrunk about its centroid by SHRINK (relative) and shifted by
# +SHIFT on every axis before an open-box overlap test. A plane on a cell
# face lands in the upper cell only, and an edge touching a face no longer
# claims the neighbour. SHIFT must stay well below SHRINK * triangle size.
SHRINK = 1e-7
SHIFT = 1e-10


@dataclass(frozen=True)
class OccupancyGrid:
    origin: np.ndarray
    cell_size: float
    occupied: np.ndarray  # (p, q, r) bool

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.occupied.shape

    @property
    def bounds(self) -> Aabb:
        return Aabb(self.origin, self.origin + np.asarray(self.dims) * self.cell_size)

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Integer cell index of each point (floor convention)."""
        return np.floor((np.atleast_2d(points) - self.origin) / self.cell_size).astype(np.int64)

    def cell_center(self, ijk) -> np.ndarray:
        return self.origin + (np.asarray(ijk, dtype=np.float64) + 0.5) * self.cell_size

    def is_occupied(self, ijk) -> bool:
        i, j, k = (int(x) for x in ijk)
        p, q, r = self.dims
        if 0 <= i < p and 0 <= j < q and 0 <= k < r:
            return bool(self.occupied[i, j, k])
        return False

    def occupied_centers(self) -> np.ndarray:
        return self.cell_center(np.argwhere(self.occupied))


@dataclass(frozen=True)
class HeightLayer:
    """Per-column index of the highest occupied cell, -1 for empty columns."""

    top: np.ndarray  # (p, q) int64

    @property
    def dims(self) -> tuple[int, int]:
        return self.top.shape


def build_occupancy(
    meshes: list[TriangleMesh],
    cell_size: float,
    padding: int = 1,
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> OccupancyGrid:
    """Mark every coarse cell that a triangle of any mesh passes through.

    The grid spans the union bounding box plus ``padding`` empty cells on
    every side (at least one).
    """
    if not cell_size > 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    if padding < 1:
        raise ValueError("padding must be at least one cell")
    meshes = [m for m in meshes if m.n_faces > 0]
    if not meshes:
        raise MeshError("no non-empty mesh to voxelize")
    box = mesh_bounds(meshes[0])
    for m in meshes[1:]:
        box = box.union(mesh_bounds(m))
    origin = box.min - padding * cell_size
    dims = np.floor(box.extent / cell_size).astype(np.int64) + 1 + 2 * padding
    n_cells = int(np.prod(dims))
    if n_cells > cell_budget:
        raise ValueError(f"occupancy grid of {tuple(dims)} = {n_cells} cells exceeds budget {cell_budget}")
    occupied = np.zeros(tuple(dims), dtype=np.bool_)
    for m in meshes:
        tri = (m.triangles - origin) / cell_size
        _rasterize(tri, occupied)
    return OccupancyGrid(origin=origin, cell_size=float(cell_size), occupied=occupied)


@nb.njit(cache=True)
def _rasterize(tri, occupied):
    p, q, r = occupied.shape
    v = np.empty((3, 3))
    for f in range(tri.shape[0]):
        for a in range(3):
            c = (tri[f, 0, a] + tri[f, 1, a] + tri[f, 2, a]) / 3.0
            for k in range(3):
                v[k, a] = tri[f, k, a] + SHRINK * (c - tri[f, k, a]) + SHIFT
        lo0 = max(int(np.floor(min(v[0, 0], v[1, 0], v[2, 0]))), 0)
        lo1 = max(int(np.floor(min(v[0, 1], v[1, 1], v[2, 1]))), 0)
        lo2 = max(int(np.floor(min(v[0, 2], v[1, 2], v[2, 2]))), 0)
        hi0 = min(int(np.floor(max(v[0, 0], v[1, 0], v[2, 0]))), p - 1)
        hi1 = min(int(np.floor(max(v[0, 1], v[1, 1], v[2, 1]))), q - 1)
        hi2 = min(int(np.floor(max(v[0, 2], v[1, 2], v[2, 2]))), r - 1)
        for i in range(lo0, hi0 + 1):
            for j in range(lo1, hi1 + 1):
                for k in range(lo2, hi2 + 1):
                    if not occupied[i, j, k] and tri_box_overlap(v, i + 0.5, j + 0.5, k + 0.5, 0.5):
                        occupied[i, j, k] = True


@nb.njit(cache=True)
def tri_box_overlap(v, cx, cy, cz, h):
    """Separating-axis test of a triangle against the OPEN cube centre c, half-size h.

    Touching counts as separated; the caller's shrink/shift supplies the tie-break.
    """
    x0, y0, z0 = v[0, 0] - cx, v[0, 1] - cy, v[0, 2] - cz
    x1, y1, z1 = v[1, 0] - cx, v[1, 1] - cy, v[1, 2] - cz
    x2, y2, z2 = v[2, 0] - cx, v[2, 1] - cy, v[2, 2] - cz
    # box face normals
    if min(x0, x1, x2) >= h or max(x0, x1, x2) <= -h:
        return False
    if min(y0, y1, y2) >= h or max(y0, y1, y2) <= -h:
        return False
    if min(z0, z1, z2) >= h or max(z0, z1, z2) <= -h:
        return False
    e0 = (x1 - x0, y1 - y0, z1 - z0)
    e1 = (x2 - x1, y2 - y1, z2 - z1)
    e2 = (x0 - x2, y0 - y2, z0 - z2)
    # triangle normal
    nx = e0[1] * e1[2] - e0[2] * e1[1]
    ny = e0[2] * e1[0] - e0[0] * e1[2]
    nz = e0[0] * e1[1] - e0[1] * e1[0]
    d = nx * x0 + ny * y0 + nz * z0
    rad = h * (abs(nx) + abs(ny) + abs(nz))
    if d >= rad or d <= -rad:
        return False
    # the nine edge-cross-axis directions
    for e in (e0, e1, e2):
        for axis in range(3):
            if axis == 0:
                ax, ay, az = 0.0, -e[2], e[1]
            elif axis == 1:
                ax, ay, az = e[2], 0.0, -e[0]
            else:
                ax, ay, az = -e[1], e[0], 0.0
            if ax == 0.0 and ay == 0.0 and az == 0.0:
                continue
            p0 = ax * x0 + ay * y0 + az * z0
            p1 = ax * x1 + ay * y1 + az * z1
            p2 = ax * x2 + ay * y2 + az * z2
            rad = h * (abs(ax) + abs(ay) + abs(az))
            if min(p0, p1, p2) >= rad or max(p0, p1, p2) <= -rad:
                return False
    return True


def top_height_layer(grid: OccupancyGrid) -> HeightLayer:
    occ = grid.occupied
    r = occ.shape[2]
    # index of the last True along z, or -1
    last = r - 1 - np.argmax(occ[:, :, ::-1], axis=2)
    top = np.where(occ.any(axis=2), last, -1).astype(np.int64)
    return HeightLayer(top)
