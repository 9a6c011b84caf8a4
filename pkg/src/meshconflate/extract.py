"""Zero level set extraction from a sparse TSDF volume with marching cubes."""

from __future__ import annotations

import numpy as np

from . import voxels as _vx
from ._mc_tables import CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE
from .mesh_io import DEGENERATE_AREA, TriangleMesh
from .tsdf import TsdfVolume

# lattice axis of each cube edge and which endpoint is the lower one
_EDGE_AXIS = np.argmax(np.abs(CORNER_OFFSETS[EDGE_CORNERS[:, 1]] - CORNER_OFFSETS[EDGE_CORNERS[:, 0]]), axis=1)
_EDGE_LOW = np.where(
    (CORNER_OFFSETS[EDGE_CORNERS[:, 0]] <= CORNER_OFFSETS[EDGE_CORNERS[:, 1]]).all(axis=1),
    EDGE_CORNERS[:, 0],
    EDGE_CORNERS[:, 1],
)
_EDGE_HIGH = np.where(_EDGE_LOW == EDGE_CORNERS[:, 0], EDGE_CORNERS[:, 1], EDGE_CORNERS[:, 0])
_CORNER_CODE = 3  # vertex key suffix for a crossing that sits exactly on a lattice point


def marching_cubes(volume: TsdfVolume) -> TriangleMesh:
    """Triangulate D = 0 over every cell whose eight corners are all observed.

    Corners with D exactly 0 count as outside. Vertices are shared through a
    lattice-edge key, so neighbouring cells weld exactly; a crossing that
    lands on a lattice point is keyed by that point instead. Triangles are
    wound so their normals point toward positive D.
    """
    ijk, _, _ = volume.voxels()
    if len(ijk) == 0:
        return _empty()
    corners = ijk[:, None, :] + CORNER_OFFSETS[None, :, :]  # (N, 8, 3)
    d, w = volume.query(corners.reshape(-1, 3))
    d = d.reshape(-1, 8)
    w = w.reshape(-1, 8)
    full = (w > 0).all(axis=1)
    bits = (d < 0).astype(np.int64) << np.arange(8)
    case = bits.sum(axis=1)
    keep = full & (case > 0) & (case < 255)
    if not keep.any():
        return _empty()
    corners, d, case = corners[keep], d[keep], case[keep]
    m = len(case)

    # per-cell data for all 12 edges: vertex key and position
    lo = corners[:, _EDGE_LOW, :]  # (M, 12, 3)
    hi = corners[:, _EDGE_HIGH, :]
    d_lo = d[:, _EDGE_LOW]
    d_hi = d[:, _EDGE_HIGH]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = d_lo / (d_lo - d_hi)
    key = _vx.pack_array(lo.reshape(-1, 3)).reshape(m, 12) * 4 + _EDGE_AXIS[None, :]
    on_lo = d_lo == 0
    on_hi = (d_hi == 0) & ~on_lo
    key = np.where(on_lo, _vx.pack_array(lo.reshape(-1, 3)).reshape(m, 12) * 4 + _CORNER_CODE, key)
    key = np.where(on_hi, _vx.pack_array(hi.reshape(-1, 3)).reshape(m, 12) * 4 + _CORNER_CODE, key)
    s = np.where(on_lo, 0.0, np.where(on_hi, 1.0, s))

    tri_edges = TRI_TABLE[case]  # (M, 16)
    valid = tri_edges >= 0
    cell_idx = np.repeat(np.arange(m), 16).reshape(m, 16)[valid]
    edge_idx = tri_edges[valid]
    used_keys = key[cell_idx, edge_idx]
    uniq, first, inverse = np.unique(used_keys, return_index=True, return_inverse=True)

    c_lo = cell_idx[first]
    e_lo = edge_idx[first]
    p_lo = volume.voxel_center(lo[c_lo, e_lo])
    p_hi = volume.voxel_center(hi[c_lo, e_lo])
    t = s[c_lo, e_lo][:, None]
    vertices = p_lo + t * (p_hi - p_lo)
    # exact lattice points, avoiding 0 * (p_hi - p_lo) rounding
    vertices[t[:, 0] == 0.0] = p_lo[t[:, 0] == 0.0]
    vertices[t[:, 0] == 1.0] = p_hi[t[:, 0] == 1.0]

    faces = inverse.reshape(-1, 3)
    # table winding has normals toward negative D; flip to face the outside
    faces = faces[:, [0, 2, 1]]
    return _clean(vertices, faces)


def _clean(vertices: np.ndarray, faces: np.ndarray) -> TriangleMesh:
    repeated = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    faces = faces[~repeated]
    tri = vertices[faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    faces = faces[area > DEGENERATE_AREA]
    used = np.unique(faces)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriangleMesh(vertices[used], remap[faces], name="conflated")


def _empty() -> TriangleMesh:
    return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), name="conflated")
