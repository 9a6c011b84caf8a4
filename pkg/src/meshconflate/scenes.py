"""Small synthetic meshes with known geometry, for tests, demos and sanity checks."""

from __future__ import annotations

import numpy as np

from .mesh_io import TriangleMesh

_CUBE_VERTS = np.array(
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]],
    dtype=np.float64,
)
# outward winding
_CUBE_FACES = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # bottom
        [4, 5, 6], [4, 6, 7],  # top
        [0, 1, 5], [0, 5, 4],  # y = 0
        [2, 3, 7], [2, 7, 6],  # y = 1
        [1, 2, 6], [1, 6, 5],  # x = 1
        [3, 0, 4], [3, 4, 7],  # x = 0
    ],
    dtype=np.int64,
)


def box(lo, hi, bottom: bool = True, name: str = "box") -> TriangleMesh:
    """Axis-aligned box; ``bottom=False`` leaves the z-min face open."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    faces = _CUBE_FACES if bottom else _CUBE_FACES[2:]
    return TriangleMesh(lo + _CUBE_VERTS * (hi - lo), faces, name=name)


def cube(edge: float = 1.0, origin=(0.0, 0.0, 0.0), name: str = "cube") -> TriangleMesh:
    origin = np.asarray(origin, dtype=np.float64)
    return box(origin, origin + edge, name=name)


def grid_plane(x_range, y_range, z: float = 0.0, n: int = 1, name: str = "plane") -> TriangleMesh:
    """Horizontal rectangle at height ``z`` split into an n x n grid of quads."""
    xs = np.linspace(x_range[0], x_range[1], n + 1)
    ys = np.linspace(y_range[0], y_range[1], n + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b, c, d = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(), idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriangleMesh(verts, faces, name=name)


def merge(meshes, name: str = "merged") -> TriangleMesh:
    verts, faces, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return TriangleMesh(np.concatenate(verts), np.concatenate(faces), name=name)


TOWN_FOOTPRINTS = [
    ((-14, -14), (-6, -8), 2.0),
    ((4, -15), (12, -5), 5.0),
    ((-12, 5), (-4, 13), 7.5),
    ((6, 6), (14, 12), 10.0),
]


def town(name: str = "town") -> TriangleMesh:
    """A 40 x 40 m ground plane with four open-bottomed boxes of 2 to 10 m height.

    The ground has holes under the buildings, like a photogrammetric surface
    that never saw what is inside them.
    """
    ground = grid_plane((-20, 20), (-20, 20), 0.0, n=40)
    centers = ground.triangles.mean(axis=1)
    inside = np.zeros(len(centers), dtype=bool)
    for (x0, y0), (x1, y1), _ in TOWN_FOOTPRINTS:
        inside |= (centers[:, 0] > x0) & (centers[:, 0] < x1) & (centers[:, 1] > y0) & (centers[:, 1] < y1)
    ground = TriangleMesh(ground.vertices, ground.faces[~inside], name="ground")
    buildings = [box((x0, y0, 0), (x1, y1, h), bottom=False) for (x0, y0), (x1, y1), h in TOWN_FOOTPRINTS]
    return merge([ground, *buildings], name=name)


def sphere(radius: float = 1.0, subdivisions: int = 3, name: str = "sphere") -> TriangleMesh:
    """Icosphere with outward winding."""
    t = (1.0 + 5**0.5) / 2.0
    verts = np.array(
        [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0], [0, -1, t], [0, 1, t],
         [0, -1, -t], [0, 1, -t], [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]],
        dtype=np.float64,
    )
    faces = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        cache = {}
        vlist = list(verts)

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = vlist[a] + vlist[b]
                vlist.append(p / np.linalg.norm(p))
                cache[key] = len(vlist) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.array(vlist)
        faces = np.array(new, dtype=np.int64)
    return TriangleMesh(verts * radius, faces, name=name)
