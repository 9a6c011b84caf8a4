"""Triangle mesh container plus PLY/OBJ reading, writing and surface sampling."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from plyfile import PlyData, PlyElement, PlyParseError

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


class MeshError(ValueError):
    """Raised for malformed, empty or otherwise unusable mesh input."""


class UnsupportedFormatError(MeshError):
    pass


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.min - tol) & (points <= self.max + tol), axis=1)

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle surface in world coordinates (meters).

    The arrays are made read-only on construction so a mesh can be shared
    freely between pipeline stages.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str = ""
    dropped_faces: int = 0

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(vertices)):
            raise MeshError("vertex coordinates must be finite")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError(
                f"face index out of range for {len(vertices)} vertices "
                f"(got {faces.min()}..{faces.max()})"
            )
        if faces.size and np.any(
            (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
        ):
            raise MeshError("face with repeated vertex index")
        vertices.flags.writeable = False
        faces.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner coordinates."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=np.float64), self.faces, self.name)

    @classmethod
    def from_arrays(cls, vertices, faces, name: str = "") -> "TriangleMesh":
        """Build a mesh, dropping degenerate faces instead of rejecting them."""
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError(f"face index out of range for {len(vertices)} vertices")
        keep = _non_degenerate(vertices, faces)
        dropped = int(len(faces) - keep.sum())
        if dropped:
            log.info("dropped %d degenerate faces from %s", dropped, name or "mesh")
        return cls(vertices, faces[keep], name=name, dropped_faces=dropped)


@dataclass(frozen=True)
class SurfaceSampleSet:
    points: np.ndarray
    face_ids: np.ndarray
    source: str = ""
    count: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "count", len(self.points))


def _non_degenerate(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    if not len(faces):
        return np.zeros(0, dtype=bool)
    repeated = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    tri = vertices[faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    return ~repeated & (area > DEGENERATE_AREA)


def load_mesh(path) -> TriangleMesh:
    """Read a PLY (ascii / binary little-endian) or OBJ triangle mesh.

    Degenerate faces are dropped; the number dropped is stored on the mesh and
    logged. Normals and any other attributes in the file are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".ply":
        vertices, faces = _read_ply(path)
    elif suffix == ".obj":
        vertices, faces = _read_obj(path)
    else:
        raise UnsupportedFormatError(f"unsupported mesh format {suffix!r} ({path})")
    if len(faces) == 0:
        raise MeshError(f"mesh has no faces: {path}")
    mesh = TriangleMesh.from_arrays(vertices, faces, name=path.stem)
    if mesh.n_faces == 0:
        raise MeshError(f"mesh has no non-degenerate faces: {path}")
    return mesh


def _read_ply(path: Path):
    try:
        ply = PlyData.read(str(path))
    except (PlyParseError, ValueError, EOFError, IndexError, KeyError) as exc:
        raise MeshError(f"malformed PLY {path}: {exc}") from exc
    names = [el.name for el in ply.elements]
    if "vertex" not in names or "face" not in names:
        raise MeshError(f"PLY {path} needs 'vertex' and 'face' elements, found {names}")
    vdata = ply["vertex"].data
    try:
        vertices = np.column_stack([vdata["x"], vdata["y"], vdata["z"]]).astype(np.float64)
    except ValueError as exc:
        raise MeshError(f"PLY {path} vertex element lacks x/y/z") from exc
    fdata = ply["face"].data
    prop = "vertex_indices" if "vertex_indices" in fdata.dtype.names else "vertex_index"
    if prop not in fdata.dtype.names:
        raise MeshError(f"PLY {path} face element lacks vertex_indices")
    faces = _triangulate([np.asarray(f, dtype=np.int64) for f in fdata[prop]])
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        raise MeshError(f"malformed PLY {path}: face index out of range for {len(vertices)} vertices")
    return vertices, faces


def _read_obj(path: Path):
    vertices = []
    polygons = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                if parts[0] == "v":
                    vertices.append([float(x) for x in parts[1:4]])
                    if len(vertices[-1]) != 3:
                        raise ValueError("vertex needs 3 coordinates")
                elif parts[0] == "f":
                    idx = []
                    for token in parts[1:]:
                        i = int(token.split("/")[0])
                        # negative indices are relative to the current vertex count
                        idx.append(i - 1 if i > 0 else len(vertices) + i)
                    if len(idx) < 3:
                        raise ValueError("face needs at least 3 vertices")
                    polygons.append(np.asarray(idx, dtype=np.int64))
            except ValueError as exc:
                raise MeshError(f"malformed OBJ {path}:{lineno}: {exc}") from exc
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces = _triangulate(polygons)
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        raise MeshError(f"malformed OBJ {path}: face index out of range for {len(vertices)} vertices")
    return vertices, faces


def _triangulate(polygons) -> np.ndarray:
    tris = []
    for poly in polygons:
        if len(poly) < 3:
            raise MeshError("face with fewer than 3 vertices")
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
    return np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def save_mesh(mesh: TriangleMesh, path, binary: bool = True) -> None:
    """Write ``mesh`` as PLY (binary little-endian unless ``binary=False``) or OBJ.

    Binary PLY stores float64 coordinates so a round trip is bit-exact.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ply":
        vertex = np.empty(mesh.n_vertices, dtype=[("x", "<f8"), ("y", "<f8"), ("z", "<f8")])
        vertex["x"], vertex["y"], vertex["z"] = mesh.vertices.T
        face = np.empty(mesh.n_faces, dtype=[("vertex_indices", "i4", (3,))])
        face["vertex_indices"] = mesh.faces
        ply = PlyData(
            [PlyElement.describe(vertex, "vertex"), PlyElement.describe(face, "face")],
            text=not binary,
            byte_order="<",
        )
        with open(path, "wb") as fh:
            ply.write(fh)
    elif suffix == ".obj":
        with open(path, "w", encoding="utf-8") as fh:
            for v in mesh.vertices:
                fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            for f in mesh.faces + 1:
                fh.write(f"f {f[0]} {f[1]} {f[2]}\n")
    else:
        raise UnsupportedFormatError(f"unsupported mesh format {suffix!r} ({path})")


def save_point_cloud(points: np.ndarray, path) -> None:
    """Write an (N, 3) point array as a binary PLY with only a vertex element."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    vertex = np.empty(len(points), dtype=[("x", "<f8"), ("y", "<f8"), ("z", "<f8")])
    vertex["x"], vertex["y"], vertex["z"] = points.T
    PlyData([PlyElement.describe(vertex, "vertex")], byte_order="<").write(os.fspath(path))


def load_point_cloud(path) -> np.ndarray:
    vdata = PlyData.read(os.fspath(path))["vertex"].data
    return np.column_stack([vdata["x"], vdata["y"], vdata["z"]]).astype(np.float64)


def mesh_bounds(mesh: TriangleMesh) -> Aabb:
    if mesh.n_vertices == 0:
        raise MeshError("cannot bound an empty mesh")
    return Aabb(mesh.vertices.min(axis=0), mesh.vertices.max(axis=0))


def sample_surface_points(mesh: TriangleMesh, count: int, seed: int = 0) -> SurfaceSampleSet:
    """Draw ``count`` area-uniform points on the mesh surface.

    A triangle is picked with probability proportional to its area, then a
    uniform barycentric point inside it (square-root warp).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if mesh.n_faces == 0:
        raise MeshError("cannot sample an empty mesh")
    areas = mesh.face_areas()
    total = areas.sum()
    if not total > 0:
        raise MeshError("mesh has zero total area")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(areas)
    face_ids = np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right")
    face_ids = np.minimum(face_ids, mesh.n_faces - 1)
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    tri = mesh.triangles[face_ids]
    points = (
        (1.0 - r1)[:, None] * tri[:, 0]
        + (r1 * (1.0 - r2))[:, None] * tri[:, 1]
        + (r1 * r2)[:, None] * tri[:, 2]
    )
    return SurfaceSampleSet(points, face_ids, source=mesh.name)
