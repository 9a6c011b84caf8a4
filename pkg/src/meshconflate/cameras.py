"""Virtual panoramic camera placement over the top-height layer, and ray directions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .occupancy import HeightLayer, OccupancyGrid

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class VirtualCamera:
    center: np.ndarray
    cell: tuple[int, int, int]  # (i, j, k) yielded by the placement loop


@dataclass(frozen=True)
class DirectionSet:
    directions: np.ndarray  # (n, 3) unit vectors

    @property
    def count(self) -> int:
        return len(self.directions)


def fibonacci_directions(n: int) -> DirectionSet:
    """``n`` near-uniform unit vectors on the sphere from the Fibonacci lattice."""
    if n < 1:
        raise ValueError("need at least one direction")
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / n
    az = i * GOLDEN_ANGLE
    rho = np.sqrt(1.0 - z * z)
    dirs = np.column_stack([rho * np.cos(az), rho * np.sin(az), z])
    return DirectionSet(dirs)


def _window_max(field: np.ndarray, phi: int) -> np.ndarray:
    """Max over the half-open window [i-phi, i+phi) x [j-phi, j+phi), clamped to the grid."""
    p, q = field.shape
    padded = np.full((p + 2 * phi, q + 2 * phi), -1, dtype=np.int64)
    padded[phi : phi + p, phi : phi + q] = field
    out = np.full((p, q), -1, dtype=np.int64)
    for di in range(2 * phi):
        for dj in range(2 * phi):
            np.maximum(out, padded[di : di + p, dj : dj + q], out=out)
    return out


def find_high_cell(layer: HeightLayer, i: int, j: int, phi: int) -> int:
    """Highest top index in the window around column (i, j); -1 if all empty."""
    top = layer.top
    p, q = top.shape
    window = top[max(i - phi, 0) : min(i + phi, p), max(j - phi, 0) : min(j + phi, q)]
    return int(window.max()) if window.size else -1


def camera_range(layer: HeightLayer, phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-column (begin_k, end_k) of the placement loop."""
    if phi < 1:
        raise ValueError("window size phi must be >= 1")
    begin = _window_max(layer.top, phi)
    end = _window_max(begin, phi) + 1
    return begin, end


def sample_camera_centers(
    layer: HeightLayer,
    phi: int = 3,
    grid: OccupancyGrid | None = None,
) -> list[VirtualCamera]:
    """Place cameras column by column over ``[begin_k, end_k)``.

    Each yielded (i, j, k) becomes a camera at the centre of cell (i, j, k+1);
    with a ``grid`` it is lifted further while that cell is occupied and
    duplicates produced by lifting are dropped. Without a grid, centres are
    in cell units. A column with ``begin_k = -1`` next to geometry (end_k > 0)
    yields from k = -1, i.e. a stack starting at the bottom layer.
    """
    begin, end = camera_range(layer, phi)
    p, q = layer.dims
    cameras = []
    seen = set()
    for i in range(p):
        for j in range(q):
            b, e = int(begin[i, j]), int(end[i, j])
            if e <= 0:
                continue
            for k in range(b, e):
                z = k + 1
                if grid is not None:
                    while grid.is_occupied((i, j, z)):
                        z += 1
                if (i, j, z) in seen:
                    continue
                seen.add((i, j, z))
                if grid is not None:
                    center = grid.cell_center((i, j, z))
                else:
                    center = np.array([i + 0.5, j + 0.5, z + 0.5])
                cameras.append(VirtualCamera(center=center, cell=(i, j, k)))
    return cameras
