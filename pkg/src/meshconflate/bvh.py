"""Flat bounding-volume hierarchy over triangles, with numba query kernels.

Nodes are stored in parallel arrays. An inner node has ``count == 0`` and
children ``left`` and ``left + 1``; a leaf covers ``order[start:start+count]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

LEAF_SIZE = 4
STACK_DEPTH = 128
# barycentric slack so a ray through a shared edge or vertex never slips between triangles
BARY_EPS = 1e-12


@dataclass(frozen=True)
class Bvh:
    tri: np.ndarray  # (F, 3, 3) triangle corners, original face order
    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    order: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_count)


def build_bvh(triangles: np.ndarray, leaf_size: int = LEAF_SIZE) -> Bvh:
    tri = np.ascontiguousarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
    if len(tri) == 0:
        raise ValueError("cannot build a hierarchy over zero triangles")
    arrays = _build(tri, leaf_size)
    return Bvh(tri, *arrays)


@nb.njit(cache=True)
def _build(tri, leaf_size):
    n = tri.shape[0]
    lo = np.empty((n, 3))
    hi = np.empty((n, 3))
    cen = np.empty((n, 3))
    for f in range(n):
        for a in range(3):
            mn = min(tri[f, 0, a], tri[f, 1, a], tri[f, 2, a])
            mx = max(tri[f, 0, a], tri[f, 1, a], tri[f, 2, a])
            lo[f, a] = mn
            hi[f, a] = mx
            cen[f, a] = 0.5 * (mn + mx)
    max_nodes = 2 * n
    node_min = np.empty((max_nodes, 3))
    node_max = np.empty((max_nodes, 3))
    node_left = np.zeros(max_nodes, dtype=np.int64)
    node_start = np.zeros(max_nodes, dtype=np.int64)
    node_count = np.zeros(max_nodes, dtype=np.int64)
    order = np.arange(n)

    stack = np.empty((max_nodes, 3), dtype=np.int64)  # node, start, end
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = stack[sp, 0]
        start = stack[sp, 1]
        end = stack[sp, 2]
        bmin = np.full(3, np.inf)
        bmax = np.full(3, -np.inf)
        cmin = np.full(3, np.inf)
        cmax = np.full(3, -np.inf)
        for k in range(start, end):
            f = order[k]
            for a in range(3):
                bmin[a] = min(bmin[a], lo[f, a])
                bmax[a] = max(bmax[a], hi[f, a])
                cmin[a] = min(cmin[a], cen[f, a])
                cmax[a] = max(cmax[a], cen[f, a])
        node_min[node] = bmin
        node_max[node] = bmax
        count = end - start
        axis = 0
        for a in range(1, 3):
            if cmax[a] - cmin[a] > cmax[axis] - cmin[axis]:
                axis = a
        if count <= leaf_size or cmax[axis] - cmin[axis] <= 0.0:
            node_start[node] = start
            node_count[node] = count
            continue
        # median split on the widest centroid axis; stable sort keeps the build deterministic
        seg = order[start:end].copy()
        keys = cen[seg, axis]
        idx = np.argsort(keys, kind="mergesort")
        order[start:end] = seg[idx]
        mid = start + count // 2
        left = n_nodes
        n_nodes += 2
        node_left[node] = left
        node_count[node] = 0
        stack[sp, 0] = left
        stack[sp, 1] = start
        stack[sp, 2] = mid
        sp += 1
        stack[sp, 0] = left + 1
        stack[sp, 1] = mid
        stack[sp, 2] = end
        sp += 1
    return (
        node_min[:n_nodes].copy(),
        node_max[:n_nodes].copy(),
        node_left[:n_nodes].copy(),
        node_start[:n_nodes].copy(),
        node_count[:n_nodes].copy(),
        order,
    )


@nb.njit(cache=True, inline="always")
def ray_triangle(tri, f, ox, oy, oz, dx, dy, dz):
    """Two-sided Moller-Trumbore; returns t or inf."""
    ax, ay, az = tri[f, 0, 0], tri[f, 0, 1], tri[f, 0, 2]
    e1x, e1y, e1z = tri[f, 1, 0] - ax, tri[f, 1, 1] - ay, tri[f, 1, 2] - az
    e2x, e2y, e2z = tri[f, 2, 0] - ax, tri[f, 2, 1] - ay, tri[f, 2, 2] - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if det == 0.0:
        return np.inf
    inv = 1.0 / det
    sx, sy, sz = ox - ax, oy - ay, oz - az
    u = (sx * px + sy * py + sz * pz) * inv
    if u < -BARY_EPS or u > 1.0 + BARY_EPS:
        return np.inf
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
        return np.inf
    return (e2x * qx + e2y * qy + e2z * qz) * inv


@nb.njit(cache=True, inline="always")
def _slab(bmin, bmax, node, ox, oy, oz, ix, iy, iz, tmax):
    t0 = (bmin[node, 0] - ox) * ix
    t1 = (bmax[node, 0] - ox) * ix
    tn = min(t0, t1)
    tf = max(t0, t1)
    t0 = (bmin[node, 1] - oy) * iy
    t1 = (bmax[node, 1] - oy) * iy
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    t0 = (bmin[node, 2] - oz) * iz
    t1 = (bmax[node, 2] - oz) * iz
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    if tn > tf + 1e-12 * (abs(tf) + 1.0) or tf < 0.0 or tn > tmax:
        return np.inf
    return tn


@nb.njit(cache=True)
def closest_hit(tri, bmin, bmax, left, start, count, order, ox, oy, oz, dx, dy, dz, tmin):
    """Nearest hit with t > tmin. Returns (t, face) or (inf, -1)."""
    # finite stand-in for 1/0 keeps 0 * inv from turning into NaN
    ix = 1.0 / dx if dx != 0.0 else 1e300
    iy = 1.0 / dy if dy != 0.0 else 1e300
    iz = 1.0 / dz if dz != 0.0 else 1e300
    best = np.inf
    best_f = -1
    stack = np.empty(STACK_DEPTH, dtype=np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _slab(bmin, bmax, node, ox, oy, oz, ix, iy, iz, best) == np.inf:
            continue
        c = count[node]
        if c > 0:
            s = start[node]
            for k in range(s, s + c):
                f = order[k]
                t = ray_triangle(tri, f, ox, oy, oz, dx, dy, dz)
                # ties go to the lower face id so the result ignores traversal order
                if t > tmin and (t < best or (t == best and f < best_f)):
                    best = t
                    best_f = f
        else:
            a = left[node]
            ta = _slab(bmin, bmax, a, ox, oy, oz, ix, iy, iz, best)
            tb = _slab(bmin, bmax, a + 1, ox, oy, oz, ix, iy, iz, best)
            if ta <= tb:
                if tb < np.inf:
                    stack[sp] = a + 1
                    sp += 1
                if ta < np.inf:
                    stack[sp] = a
                    sp += 1
            else:
                if ta < np.inf:
                    stack[sp] = a
                    sp += 1
                stack[sp] = a + 1
                sp += 1
    return best, best_f


@nb.njit(cache=True, parallel=True)
def cast_rays(tri, bmin, bmax, left, start, count, order, origins, dirs, tmin):
    """Closest hits for many rays. ``origins`` is (N, 3) or (1, 3) shared; ``tmin`` is (N,)."""
    n = dirs.shape[0]
    t_out = np.empty(n)
    f_out = np.empty(n, dtype=np.int64)
    step = 0 if origins.shape[0] == 1 else 1
    for i in nb.prange(n):
        o = i * step
        t, f = closest_hit(
            tri, bmin, bmax, left, start, count, order,
            origins[o, 0], origins[o, 1], origins[o, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2], tmin[i],
        )
        t_out[i] = t
        f_out[i] = f
    return t_out, f_out


@nb.njit(cache=True, inline="always")
def closest_point_on_triangle(tri, f, px, py, pz):
    """Closest point on triangle f to p (Voronoi-region walk). Returns (x, y, z)."""
    ax, ay, az = tri[f, 0, 0], tri[f, 0, 1], tri[f, 0, 2]
    bx, by, bz = tri[f, 1, 0], tri[f, 1, 1], tri[f, 1, 2]
    cx, cy, cz = tri[f, 2, 0], tri[f, 2, 1], tri[f, 2, 2]
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w


@nb.njit(cache=True, inline="always")
def _box_dist2(bmin, bmax, node, px, py, pz):
    d = 0.0
    q = max(bmin[node, 0] - px, 0.0, px - bmax[node, 0])
    d += q * q
    q = max(bmin[node, 1] - py, 0.0, py - bmax[node, 1])
    d += q * q
    q = max(bmin[node, 2] - pz, 0.0, pz - bmax[node, 2])
    d += q * q
    return d


@nb.njit(cache=True)
def nearest_triangle(tri, bmin, bmax, left, start, count, order, px, py, pz):
    """Squared distance and face id of the triangle closest to p."""
    best = np.inf
    best_f = -1
    stack = np.empty(STACK_DEPTH, dtype=np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _box_dist2(bmin, bmax, node, px, py, pz) > best:
            continue
        c = count[node]
        if c > 0:
            s = start[node]
            for k in range(s, s + c):
                f = order[k]
                qx, qy, qz = closest_point_on_triangle(tri, f, px, py, pz)
                d = (qx - px) ** 2 + (qy - py) ** 2 + (qz - pz) ** 2
                if d < best or (d == best and f < best_f):
                    best = d
                    best_f = f
        else:
            a = left[node]
            da = _box_dist2(bmin, bmax, a, px, py, pz)
            db = _box_dist2(bmin, bmax, a + 1, px, py, pz)
            if da <= db:
                stack[sp] = a + 1
                stack[sp + 1] = a
            else:
                stack[sp] = a
                stack[sp + 1] = a + 1
            sp += 2
    return best, best_f


@nb.njit(cache=True, parallel=True)
def nearest_distances(tri, bmin, bmax, left, start, count, order, points):
    n = points.shape[0]
    dist = np.empty(n)
    face = np.empty(n, dtype=np.int64)
    for i in nb.prange(n):
        d2, f = nearest_triangle(tri, bmin, bmax, left, start, count, order, points[i, 0], points[i, 1], points[i, 2])
        dist[i] = np.sqrt(d2)
        face[i] = f
    return dist, face


def bvh_args(bvh: Bvh):
    return bvh.tri, bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_start, bvh.node_count, bvh.order
