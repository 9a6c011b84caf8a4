"""Conflation of overlapping triangle meshes through a virtual-camera TSDF."""

import os as _os

import numba as _numba

# probe OpenMP before TBB; an outdated system TBB otherwise warns on first parallel call
if "NUMBA_THREADING_LAYER_PRIORITY" not in _os.environ:
    _numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .cameras import DirectionSet, VirtualCamera, fibonacci_directions, find_high_cell, sample_camera_centers
from .config import ConflationConfig, SourceConfig, load_config
from .evaluate import EvalReport, ProximityIndex, f_score, mean_distance, point_to_mesh_distance
from .extract import marching_cubes
from .mesh_io import (
    Aabb,
    MeshError,
    SurfaceSampleSet,
    TriangleMesh,
    load_mesh,
    mesh_bounds,
    sample_surface_points,
    save_mesh,
)
from .occupancy import HeightLayer, OccupancyGrid, build_occupancy, top_height_layer
from .raycast import (
    DepthSampleBatch,
    Ray,
    RayAccelerator,
    RayHit,
    build_accelerator,
    first_hit,
    next_hit_after,
    render_depth,
)
from .tsdf import (
    RayBand,
    SourceProfile,
    TsdfVolume,
    adaptive_negative_band,
    conflate,
    integrate_ray,
    integrate_view,
    new_volume,
    place_cameras,
    ray_weight,
    truncated_distance,
)

__version__ = "0.1.0"
