"""Sparse truncated signed distance volume and per-ray weighted integration."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from . import voxels as _vx
from .cameras import fibonacci_directions, sample_camera_centers
from .config import ConflationConfig
from .mesh_io import MeshError, TriangleMesh, mesh_bounds
from .occupancy import build_occupancy, top_height_layer
from .raycast import DepthSampleBatch, Ray, build_accelerator, render_depth

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SourceProfile:
    """Conflation parameters of one input mesh.

    ``weight`` scales every contribution of the source; ``bandwidth`` is its
    truncation half-width in meters.
    """

    mesh_id: str
    weight: float = 1.0
    bandwidth: float = 5.0
    note: str = ""

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"source {self.mesh_id!r}: weight must be positive")
        if not self.bandwidth > 0:
            raise ValueError(f"source {self.mesh_id!r}: bandwidth must be positive")


@dataclass(frozen=True)
class RayBand:
    t_hit: float
    m_pos: float
    m_neg: float

    def __post_init__(self):
        if not (0 < self.m_neg <= self.m_pos):
            raise ValueError(f"need 0 < m_neg <= m_pos, got {self.m_neg}, {self.m_pos}")


class TsdfVolume:
    """Sparse TSDF: voxel (i, j, k) has its centre at ``origin + (ijk + 0.5) * voxel_size``.

    Records hold the running sums of ``w * d`` and ``w``; ``D = sum(w*d) / sum(w)``
    equals the incremental weighted average. Unobserved voxels are simply absent.
    """

    def __init__(self, voxel_size: float, m_max: float, origin=(0.0, 0.0, 0.0)):
        if not voxel_size > 0:
            raise ValueError(f"voxel_size must be positive, got {voxel_size}")
        if not m_max >= voxel_size:
            raise ValueError(f"max bandwidth {m_max} must be >= voxel size {voxel_size}")
        self.voxel_size = float(voxel_size)
        self.m_max = float(m_max)
        self.origin = np.asarray(origin, dtype=np.float64).reshape(3)
        self.store = _vx.VoxelStore()

    def __len__(self) -> int:
        return len(self.store)

    def voxel_of(self, points: np.ndarray) -> np.ndarray:
        return np.floor((np.atleast_2d(points) - self.origin) / self.voxel_size).astype(np.int64)

    def voxel_center(self, ijk) -> np.ndarray:
        return self.origin + (np.asarray(ijk, dtype=np.float64) + 0.5) * self.voxel_size

    def query(self, ijk: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(D, W) for an (N, 3) array of voxel indices; absent voxels give (0, 0)."""
        wd, w = self.store.lookup(_vx.pack_array(ijk))
        d = np.divide(wd, w, out=np.zeros_like(wd), where=w > 0)
        return d, w

    def get(self, ijk) -> tuple[float, float] | None:
        d, w = self.query(np.asarray(ijk).reshape(1, 3))
        return (float(d[0]), float(w[0])) if w[0] > 0 else None

    def voxels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All stored voxels as (ijk, D, W), sorted by packed key."""
        keys, wd, w = self.store.items()
        return _vx.unpack(keys), wd / w, w

    def merge(self, other: "TsdfVolume") -> None:
        """Fold another volume's contributions into this one."""
        if other.voxel_size != self.voxel_size or not np.array_equal(other.origin, self.origin):
            raise ValueError("volumes must share voxel size and origin")
        keys, wd, w = other.store.items()
        self.store.add(keys, wd, w)

    def save(self, path) -> None:
        """Dump (i, j, k, D, W) rows; ``.npz`` is binary, anything else is text."""
        ijk, d, w = self.voxels()
        path = Path(path)
        if path.suffix == ".npz":
            np.savez(path, ijk=ijk, D=d, W=w, voxel_size=self.voxel_size, m_max=self.m_max, origin=self.origin)
        else:
            header = f"voxel_size={self.voxel_size!r} m_max={self.m_max!r} origin={' '.join(map(repr, self.origin))}\ni j k D W"
            rows = np.column_stack([ijk, d, w])
            np.savetxt(path, rows, fmt=["%d", "%d", "%d", "%.17g", "%.17g"], header=header)

    @classmethod
    def from_arrays(cls, voxel_size, m_max, ijk, d, w, origin=(0.0, 0.0, 0.0)) -> "TsdfVolume":
        """Build a volume directly from per-voxel (D, W); handy for analytic fields."""
        vol = cls(voxel_size, m_max, origin)
        w = np.asarray(w, dtype=np.float64)
        if np.any(w <= 0):
            raise ValueError("stored voxels need positive weight")
        vol.store.add(_vx.pack_array(ijk), np.asarray(d, dtype=np.float64) * w, w)
        return vol


def new_volume(voxel_size: float, m_max: float) -> TsdfVolume:
    return TsdfVolume(voxel_size, m_max)


def truncated_distance(t_i: float, t: float, m: float) -> float:
    """Projective distance to the hit along the ray, clamped to [-m, m]."""
    return max(-m, min(m, t_i - t))


def ray_weight(t_i: float, t: float, m: float, C: float, m_neg: float | None = None) -> float:
    """C inside the band ``-m_neg <= t_i - t <= m`` (both ends inclusive), else 0.

    With ``m_neg`` omitted the band is symmetric.
    """
    if m_neg is None:
        m_neg = m
    s = t_i - t
    return C if -m_neg <= s <= m else 0.0


def adaptive_negative_band(t_i: float, t_next: float | None, m_k: float, voxel_size: float) -> float:
    """Depth of the band behind a hit.

    Full ``m_k`` when nothing lies behind the hit within ``2 m_k``; otherwise
    half the gap to the next surface, never thinner than one voxel.
    """
    if t_next is None or not np.isfinite(t_next) or t_next - t_i >= 2.0 * m_k:
        return m_k
    return min(m_k, max(voxel_size, 0.5 * (t_next - t_i)))


def adaptive_negative_bands(t_hit: np.ndarray, t_next: np.ndarray, m_k: float, voxel_size: float) -> np.ndarray:
    gap = t_next - t_hit
    band = np.minimum(m_k, np.maximum(voxel_size, 0.5 * gap))
    return np.where(np.isfinite(t_next) & (gap < 2.0 * m_k), band, m_k)


@nb.njit(cache=True)
def _integrate_rays(keys, wd, w, count, limit, origin, vs, o, dirs, t_hit, m_neg, m_pos, C, start):
    """Fold rays start.. into the table; stops early (returning the ray index) when it needs to grow."""
    h = 0.5 * vs
    n = dirs.shape[0]
    for i in range(start, n):
        ti = t_hit[i]
        t0 = max(0.0, ti - m_pos)
        t1 = ti + m_neg[i]
        nsteps = int(np.ceil((t1 - t0) / h)) + 1
        if count + nsteps > limit:
            return i, count
        dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        prev = -2
        for s in range(nsteps):
            t = min(t0 + s * h, t1)
            ix = int(np.floor((o[0] + t * dx - origin[0]) / vs))
            iy = int(np.floor((o[1] + t * dy - origin[1]) / vs))
            iz = int(np.floor((o[2] + t * dz - origin[2]) / vs))
            key = _vx.pack(ix, iy, iz)
            if key == prev:
                continue
            prev = key
            tc = (
                (origin[0] + (ix + 0.5) * vs - o[0]) * dx
                + (origin[1] + (iy + 0.5) * vs - o[1]) * dy
                + (origin[2] + (iz + 0.5) * vs - o[2]) * dz
            )
            sdf = ti - tc
            if sdf > m_pos or sdf < -m_neg[i]:
                continue
            d = min(m_pos, max(-m_pos, sdf))
            slot = _vx.find_slot(keys, key)
            if keys[slot] == _vx.EMPTY:
                keys[slot] = key
                count += 1
            wd[slot] += C * d
            w[slot] += C
    return n, count


def _integrate(volume: TsdfVolume, origin, dirs, t_hit, m_neg, m_pos: float, C: float) -> None:
    store = volume.store
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    t_hit = np.ascontiguousarray(t_hit, dtype=np.float64)
    m_neg = np.ascontiguousarray(m_neg, dtype=np.float64)
    o = np.ascontiguousarray(origin, dtype=np.float64).reshape(3)
    if m_pos > volume.m_max or np.any(m_neg > volume.m_max):
        raise ValueError(f"band exceeds the volume's max bandwidth {volume.m_max}")
    # a single ray can touch this many voxels at most
    per_ray = int(np.ceil(2.0 * volume.m_max / (0.5 * volume.voxel_size))) + 2
    i = 0
    while i < len(dirs):
        store.reserve(per_ray)
        i, store.count = _integrate_rays(
            store.keys, store.wd, store.w, store.count, store.limit,
            volume.origin, volume.voxel_size, o, dirs, t_hit, m_neg, float(m_pos), float(C), i,
        )
        if i < len(dirs):
            store.grow()


def integrate_ray(volume: TsdfVolume, ray: Ray, band: RayBand, C: float) -> None:
    """Update every voxel the ray crosses whose centre falls in the band around the hit."""
    if not C > 0:
        raise ValueError("weight must be positive")
    _integrate(volume, ray.origin, ray.direction, [band.t_hit], [band.m_neg], band.m_pos, C)


def integrate_view(
    volume: TsdfVolume,
    batch: DepthSampleBatch,
    profile: SourceProfile,
    adaptive: bool = True,
) -> None:
    """Integrate all hits of one camera against one source."""
    if batch.source != profile.mesh_id:
        raise ValueError(f"batch from source {batch.source!r} does not match profile {profile.mesh_id!r}")
    if len(batch) == 0:
        return
    m_k = profile.bandwidth
    if adaptive:
        m_neg = adaptive_negative_bands(batch.t_hit, batch.t_next, m_k, volume.voxel_size)
    else:
        m_neg = np.full(len(batch), m_k)
    _integrate(volume, batch.camera.center, batch.directions, batch.t_hit, m_neg, m_k, profile.weight)


@dataclass
class ConflationStats:
    cameras: int = 0
    rays: int = 0
    hits: int = 0
    voxels: int = 0
    stage_seconds: dict = field(default_factory=dict)


def place_cameras(meshes: list[TriangleMesh], config: ConflationConfig):
    """Coarse union occupancy and the camera field over it, shared by all sources."""
    grid = build_occupancy(meshes, config.coarse_cell_factor * config.voxel_size, padding=config.grid_padding)
    cameras = sample_camera_centers(top_height_layer(grid), config.window_phi, grid)
    if not cameras:
        raise MeshError("camera placement produced no cameras")
    return grid, cameras


def conflate(
    sources: list[tuple[TriangleMesh, SourceProfile]],
    config: ConflationConfig,
    stats: ConflationStats | None = None,
    camera_order=None,
) -> TsdfVolume:
    """Run placement, rendering and integration for all sources into one volume.

    All sources share one camera field built from their union occupancy.
    ``camera_order`` optionally permutes the cameras (the result does not
    depend on it beyond float rounding).
    """
    if not sources:
        raise ValueError("need at least one source")
    if stats is None:
        stats = ConflationStats()
    ids = [p.mesh_id for _, p in sources]
    if len(set(ids)) != len(ids):
        raise ValueError(f"source ids must be unique, got {ids}")
    vs = config.voxel_size
    for _, profile in sources:
        if profile.bandwidth > config.max_bandwidth:
            raise ValueError(
                f"source {profile.mesh_id!r}: bandwidth {profile.bandwidth} exceeds max_bandwidth {config.max_bandwidth}"
            )
    meshes = [m for m, _ in sources]
    box = mesh_bounds(meshes[0])
    for m in meshes[1:]:
        box = box.union(mesh_bounds(m))
    if vs >= box.diagonal:
        raise ValueError(f"voxel_size {vs} is not smaller than the scene diagonal {box.diagonal:.3g}")

    tic = time.perf_counter()
    grid, cameras = place_cameras(meshes, config)
    dirs = fibonacci_directions(config.rays_per_camera)
    stats.stage_seconds["cameras"] = time.perf_counter() - tic
    stats.cameras = len(cameras)
    log.info("placed %d cameras on a %s occupancy grid", len(cameras), grid.dims)

    tic = time.perf_counter()
    accelerators = [(build_accelerator(m, p.mesh_id), p) for m, p in sources]
    stats.stage_seconds["accelerators"] = time.perf_counter() - tic

    volume = TsdfVolume(vs, config.max_bandwidth)
    order = range(len(cameras)) if camera_order is None else camera_order
    render_s = integrate_s = 0.0
    for c in order:
        cam = cameras[c]
        for acc, profile in accelerators:
            t0 = time.perf_counter()
            batch = render_depth(acc, cam, dirs, config.eps_skip)
            t1 = time.perf_counter()
            integrate_view(volume, batch, profile, adaptive=config.adaptive_band)
            integrate_s += time.perf_counter() - t1
            render_s += t1 - t0
            stats.rays += dirs.count
            stats.hits += len(batch)
    stats.stage_seconds["render"] = render_s
    stats.stage_seconds["integrate"] = integrate_s
    stats.voxels = len(volume)
    log.info("cast %d rays (%d hits), %d voxels stored", stats.rays, stats.hits, stats.voxels)
    return volume

