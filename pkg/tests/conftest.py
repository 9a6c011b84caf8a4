import warnings

import numpy as np
import pytest

from meshconflate import scenes
from meshconflate.mesh_io import TriangleMesh

warnings.filterwarnings("ignore", category=DeprecationWarning, module="numba")


# ---------------------------------------------------------------- brute-force oracles
# Written independently of the numba kernels: plain numpy, different formulations.


class BruteCaster:
    """Nearest plane crossing inside a triangle, via plane distance + edge sign tests.

    Per-triangle quantities are computed once so many rays can be tested cheaply.
    """

    def __init__(self, tri):
        tri = np.asarray(tri, dtype=np.float64)
        self.a, self.b, self.c = tri[:, 0], tri[:, 1], tri[:, 2]
        self.n = np.cross(self.b - self.a, self.c - self.a)
        self.na = np.einsum("ij,ij->i", self.n, self.a)
        self.e0 = np.cross(self.n, self.b - self.a)
        self.e1 = np.cross(self.n, self.c - self.b)
        self.e2 = np.cross(self.n, self.a - self.c)
        self.k0 = np.einsum("ij,ij->i", self.e0, self.a)
        self.k1 = np.einsum("ij,ij->i", self.e1, self.b)
        self.k2 = np.einsum("ij,ij->i", self.e2, self.c)
        self.tol = 1e-9 * np.einsum("ij,ij->i", self.n, self.n)

    def first_hit(self, o, d, t_min=1e-6):
        denom = self.n @ d
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.na - self.n @ o) / denom
        p = o + t[:, None] * d
        # (n x edge) . (p - start) >= 0 on the inner side of each edge
        inside = (
            (np.einsum("ij,ij->i", self.e0, p) - self.k0 >= -self.tol)
            & (np.einsum("ij,ij->i", self.e1, p) - self.k1 >= -self.tol)
            & (np.einsum("ij,ij->i", self.e2, p) - self.k2 >= -self.tol)
        )
        ok = inside & np.isfinite(t) & (t > t_min) & (denom != 0)
        if not ok.any():
            return np.inf, -1
        k = np.flatnonzero(ok)[np.argmin(t[ok])]
        return float(t[k]), int(k)


def brute_first_hit(tri, o, d, t_min=1e-6):
    return BruteCaster(tri).first_hit(np.asarray(o, dtype=np.float64), np.asarray(d, dtype=np.float64), t_min)


def _segment_distance(p, a, b):
    ab = b - a
    s = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + s[:, None] * ab), axis=1)


def brute_point_triangle_distance(p, tri):
    """Distance from one point to each triangle: plane projection if inside, else nearest edge."""
    tri = np.asarray(tri, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n, axis=1, keepdims=True)
    h = np.einsum("ij,ij->i", p - a, n)
    q = p - h[:, None] * n
    s0 = np.einsum("ij,ij->i", np.cross(b - a, q - a), n)
    s1 = np.einsum("ij,ij->i", np.cross(c - b, q - b), n)
    s2 = np.einsum("ij,ij->i", np.cross(a - c, q - c), n)
    inside = (s0 >= 0) & (s1 >= 0) & (s2 >= 0)
    pp = np.broadcast_to(p, a.shape)
    edge = np.minimum(np.minimum(_segment_distance(pp, a, b), _segment_distance(pp, b, c)), _segment_distance(pp, c, a))
    return np.where(inside, np.abs(h), edge)


def brute_point_mesh_distance(points, mesh):
    tri = mesh.triangles
    return np.array([brute_point_triangle_distance(p, tri).min() for p in np.atleast_2d(points)])


# ---------------------------------------------------------------- fixtures


@pytest.fixture
def unit_cube():
    return scenes.cube(1.0)


@pytest.fixture
def one_triangle():
    return TriangleMesh(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), np.array([[0, 1, 2]]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance verdicts

_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for the terminal summary, then assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(criterion: int, ok: bool, detail: str) -> None:
        lines.append((criterion, f"{'PASS' if ok else 'FAIL'}  criterion {criterion:2d}: {detail}"))
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
