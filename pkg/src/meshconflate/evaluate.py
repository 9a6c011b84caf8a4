"""Mesh-to-mesh comparison: mean surface distance, precision, recall and F-score."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import bvh as _bvh
from .mesh_io import MeshError, TriangleMesh, sample_surface_points

DEFAULT_SAMPLES = 100_000
DEFAULT_TAU = 0.5


# distances below this many ulps of the coordinate magnitude are rounding noise
ROUNDOFF_ULPS = 64


class ProximityIndex:
    """Closest-point queries against one mesh's triangles.

    Distances at the level of coordinate round-off are reported as exactly 0,
    so a point sampled on a triangle is at distance 0 from it.
    """

    def __init__(self, mesh: TriangleMesh):
        if mesh.n_faces == 0:
            raise MeshError("cannot query distances to an empty mesh")
        self.mesh = mesh
        self.bvh = _bvh.build_bvh(mesh.triangles)
        self.roundoff = ROUNDOFF_ULPS * np.finfo(np.float64).eps * max(1.0, float(np.abs(mesh.vertices).max()))

    def distances(self, points: np.ndarray) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        dist, _ = _bvh.nearest_distances(*_bvh.bvh_args(self.bvh), pts)
        dist[dist <= self.roundoff] = 0.0
        return dist


def point_to_mesh_distance(point, index: ProximityIndex) -> float:
    return float(index.distances(np.asarray(point, dtype=np.float64).reshape(1, 3))[0])


def mean_distance(result: TriangleMesh, reference: TriangleMesh, n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Mean distance from area-uniform samples on ``result`` to the ``reference`` surface."""
    pts = sample_surface_points(result, n_samples, seed).points
    return float(ProximityIndex(reference).distances(pts).mean())


@dataclass(frozen=True)
class EvalReport:
    mean_distance: float  # result -> reference
    mean_distance_symmetric: float  # average of both directions
    precision: float
    recall: float
    f_score: float
    tau: float
    n_samples: int
    seed: int
    result_vertices: int
    result_faces: int
    reference_vertices: int
    reference_faces: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return "\n".join(f"{k}: {v}" for k, v in self.to_dict().items()) + "\n"

    def table_row(self, label: str = "result") -> str:
        return (
            f"{label}\t{self.mean_distance:.3f} m\t{self.f_score:.3f}\t"
            f"{_k(self.result_vertices)}\t{_k(self.result_faces)}"
        )

    def save(self, path) -> None:
        """Write the report as JSON (``.json``) or one ``key: value`` line per field."""
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        else:
            path.write_text(self.to_text())


TABLE_HEADER = "method\tmean distance\tF-score\t# vertices\t# faces"


def _k(n: int) -> str:
    if n >= 1_000_000:
        return f"{n / 1e6:.1f}M"
    if n >= 1_000:
        return f"{round(n / 1e3)}K"
    return str(n)


def harmonic_mean(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class DistanceSamples:
    """Raw per-sample distances in both directions, kept for plotting and tau sweeps."""

    result_to_reference: np.ndarray
    reference_to_result: np.ndarray

    def report_at(self, tau: float) -> tuple[float, float, float]:
        precision = float(np.mean(self.result_to_reference <= tau))
        recall = float(np.mean(self.reference_to_result <= tau))
        return precision, recall, harmonic_mean(precision, recall)


def distance_samples(result: TriangleMesh, reference: TriangleMesh, n_samples: int, seed: int) -> DistanceSamples:
    res_pts = sample_surface_points(result, n_samples, seed).points
    # same seed for both meshes: swapping the roles swaps precision and recall exactly
    ref_pts = sample_surface_points(reference, n_samples, seed).points
    return DistanceSamples(
        ProximityIndex(reference).distances(res_pts),
        ProximityIndex(result).distances(ref_pts),
    )


def f_score(
    result: TriangleMesh,
    reference: TriangleMesh,
    tau: float = DEFAULT_TAU,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    samples: DistanceSamples | None = None,
) -> EvalReport:
    """Precision (result samples within tau of reference), recall (the converse), F-score."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if samples is None:
        samples = distance_samples(result, reference, n_samples, seed)
    precision, recall, f = samples.report_at(tau)
    fwd = float(samples.result_to_reference.mean())
    bwd = float(samples.reference_to_result.mean())
    return EvalReport(
        mean_distance=fwd,
        mean_distance_symmetric=0.5 * (fwd + bwd),
        precision=precision,
        recall=recall,
        f_score=f,
        tau=float(tau),
        n_samples=int(n_samples),
        seed=int(seed),
        result_vertices=result.n_vertices,
        result_faces=result.n_faces,
        reference_vertices=reference.n_vertices,
        reference_faces=reference.n_faces,
    )
