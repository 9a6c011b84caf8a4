"""Ray queries against a single mesh: first hit, next hit and per-camera depth rendering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bvh as _bvh
from .cameras import DirectionSet, VirtualCamera
from .mesh_io import MeshError, TriangleMesh

T_MIN = 1e-6
EPS_SKIP = 1e-4


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(d)
        if not norm > 0:
            raise ValueError("ray direction must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            d = d / norm
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class RayHit:
    t: float
    face: int
    source: str = ""


@dataclass(frozen=True)
class RayAccelerator:
    mesh: TriangleMesh
    bvh: _bvh.Bvh
    source_id: str = ""

    @property
    def source(self) -> str:
        return self.source_id or self.mesh.name


@dataclass(frozen=True)
class DepthSampleBatch:
    """Hits of one camera against one source. Misses are not stored.

    ``t_next`` is ``inf`` where the ray leaves the mesh after its first hit.
    """

    camera: VirtualCamera
    source: str
    direction_index: np.ndarray
    directions: np.ndarray
    t_hit: np.ndarray
    t_next: np.ndarray

    def __len__(self) -> int:
        return len(self.t_hit)

    def hit_points(self) -> np.ndarray:
        return self.camera.center + self.t_hit[:, None] * self.directions


def build_accelerator(mesh: TriangleMesh, source_id: str = "") -> RayAccelerator:
    if mesh.n_faces == 0:
        raise MeshError("cannot build an accelerator for an empty mesh")
    return RayAccelerator(mesh, _bvh.build_bvh(mesh.triangles), source_id)


def cast(acc: RayAccelerator, origins, directions, t_min) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized closest hit beyond ``t_min`` for many rays; misses give (inf, -1)."""
    dirs = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (len(dirs),)).copy()
    return _bvh.cast_rays(*_bvh.bvh_args(acc.bvh), origins, dirs, t_min)


def first_hit(acc: RayAccelerator, ray: Ray, t_min: float = T_MIN) -> RayHit | None:
    t, f = cast(acc, ray.origin, ray.direction, t_min)
    if not np.isfinite(t[0]):
        return None
    return RayHit(float(t[0]), int(f[0]), acc.source)


def next_hit_after(acc: RayAccelerator, ray: Ray, t_prev: float, eps_skip: float = EPS_SKIP) -> RayHit | None:
    return first_hit(acc, ray, t_min=t_prev + eps_skip)


def render_depth(
    acc: RayAccelerator,
    camera: VirtualCamera,
    dirs: DirectionSet,
    eps_skip: float = EPS_SKIP,
) -> DepthSampleBatch:
    """Cast every direction from the camera; record first and next hits of the rays that hit."""
    d = dirs.directions
    if len(d) == 0:
        empty = np.zeros(0)
        return DepthSampleBatch(camera, acc.source, np.zeros(0, dtype=np.int64), np.zeros((0, 3)), empty, empty)
    t, _ = cast(acc, camera.center, d, T_MIN)
    hit = np.flatnonzero(np.isfinite(t))
    t_hit = t[hit]
    t_next, _ = cast(acc, camera.center, d[hit], t_hit + eps_skip)
    return DepthSampleBatch(camera, acc.source, hit, d[hit], t_hit, t_next)
