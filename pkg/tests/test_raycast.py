import numpy as np
import pytest
from conftest import BruteCaster

from meshconflate import scenes
from meshconflate.cameras import DirectionSet, VirtualCamera, fibonacci_directions
from meshconflate.mesh_io import MeshError, TriangleMesh
from meshconflate.raycast import (
    EPS_SKIP,
    Ray,
    build_accelerator,
    cast,
    first_hit,
    next_hit_after,
    render_depth,
)


def _random_rays_from_outside(rng, n, radius=4.0, center=(0.5, 0.5, 0.5), spread=1.0):
    o = rng.normal(size=(n, 3))
    o = o / np.linalg.norm(o, axis=1, keepdims=True) * radius + center
    target = np.asarray(center) + rng.uniform(-spread, spread, size=(n, 3))
    d = target - o
    return o, d / np.linalg.norm(d, axis=1, keepdims=True)


def _assert_matches_brute(acc, tri, origins, dirs, rtol=1e-9):
    t, f = cast(acc, origins, dirs, 1e-6)
    brute = BruteCaster(tri)
    for k in range(len(dirs)):
        tb, fb = brute.first_hit(origins[k], dirs[k])
        if np.isinf(tb):
            assert np.isinf(t[k]), k
        else:
            assert t[k] == pytest.approx(tb, rel=rtol), k


def test_single_triangle_analytic(one_triangle):
    acc = build_accelerator(one_triangle)
    hit = first_hit(acc, Ray([0.25, 0.25, 3.0], [0, 0, -1]))
    assert hit.t == pytest.approx(3.0, rel=1e-12) and hit.face == 0
    assert first_hit(acc, Ray([0.9, 0.9, 3.0], [0, 0, -1])) is None


def test_cube_random_rays_match_brute_force(rng):
    cube = scenes.cube(1.0)
    acc = build_accelerator(cube)
    o, d = _random_rays_from_outside(rng, 1000)
    _assert_matches_brute(acc, cube.triangles, o, d)


def test_sphere_random_rays_match_brute_force(rng):
    sphere = scenes.sphere(1.0, 3).translated([0.5, 0.5, 0.5])
    acc = build_accelerator(sphere)
    o, d = _random_rays_from_outside(rng, 500, radius=3.0)
    _assert_matches_brute(acc, sphere.triangles, o, d)


@pytest.mark.slow
def test_large_mesh_hit_count_matches_brute_force_subsample(rng):
    sphere = scenes.sphere(1.0, 6).translated([0.5, 0.5, 0.5])  # 81,920 triangles
    wavy = scenes.grid_plane((-2, 3), (-2, 3), -1.0, n=100)  # 20,000 triangles
    mesh = scenes.merge([sphere, wavy])
    assert mesh.n_faces > 100_000
    acc = build_accelerator(mesh)
    o, d = _random_rays_from_outside(rng, 1_000_000, radius=3.0)
    t, _ = cast(acc, o, d, 1e-6)
    sub = rng.choice(len(d), 1000, replace=False)
    brute = BruteCaster(mesh.triangles)
    brute_hits = sum(np.isfinite(brute.first_hit(o[k], d[k])[0]) for k in sub)
    assert int(np.isfinite(t[sub]).sum()) == brute_hits


def test_plane_hit_and_miss():
    plane = scenes.grid_plane((-10, 10), (-10, 10), 0.0)
    acc = build_accelerator(plane)
    assert first_hit(acc, Ray([0, 0, 5], [0, 0, -1])).t == 5.0
    assert first_hit(acc, Ray([0, 0, 5], [0, 0, 1])) is None


@pytest.mark.parametrize("flip_top,flip_bottom", [(False, False), (True, False), (False, True), (True, True)])
def test_slab_first_and_next_hit_any_winding(flip_top, flip_bottom):
    top = scenes.grid_plane((-5, 5), (-5, 5), 0.0)
    bot = scenes.grid_plane((-5, 5), (-5, 5), -1.0)
    if flip_top:
        top = TriangleMesh(top.vertices, top.faces[:, ::-1])
    if flip_bottom:
        bot = TriangleMesh(bot.vertices, bot.faces[:, ::-1])
    acc = build_accelerator(scenes.merge([top, bot]))
    ray = Ray([0.3, 0.2, 5.0], [0, 0, -1])
    first = first_hit(acc, ray)
    assert first.t == pytest.approx(5.0, abs=1e-12)
    second = next_hit_after(acc, ray, first.t)
    assert second.t == pytest.approx(6.0, abs=1e-12)
    assert next_hit_after(acc, ray, second.t) is None


def test_single_plane_has_no_next_hit():
    acc = build_accelerator(scenes.grid_plane((-1, 1), (-1, 1), 0.0))
    ray = Ray([0.1, 0.1, 2.0], [0, 0, -1])
    assert next_hit_after(acc, ray, first_hit(acc, ray).t) is None


def _slab_interval(o, d, lo, hi):
    with np.errstate(divide="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    return np.max(np.minimum(t1, t2)), np.min(np.maximum(t1, t2))


def test_cube_next_hit_is_back_face(rng):
    cube = scenes.cube(1.0)
    acc = build_accelerator(cube)
    o, d = _random_rays_from_outside(rng, 100, center=(0.5, 0.5, 0.5), spread=0.45)
    checked = 0
    for k in range(100):
        t_in, t_out = _slab_interval(o[k], d[k], np.zeros(3), np.ones(3))
        if t_out - t_in < 1e-3:
            continue
        ray = Ray(o[k], d[k])
        first = first_hit(acc, ray)
        second = next_hit_after(acc, ray, first.t)
        assert first.t == pytest.approx(t_in, rel=1e-9)
        assert second.t - first.t == pytest.approx(t_out - t_in, rel=1e-9, abs=1e-12)
        checked += 1
    assert checked > 90


def test_shared_edge_counts_one_crossing():
    quad = scenes.grid_plane((0, 1), (0, 1), 0.0)  # diagonal from (0,0) to (1,1)
    acc = build_accelerator(quad)
    for x in (0.5, 0.25, 0.0):
        ray = Ray([x, x, 1.0], [0, 0, -1])
        first = first_hit(acc, ray)
        assert first is not None and first.t == 1.0
        assert next_hit_after(acc, ray, first.t) is None


def test_hits_invariant_under_reordering_and_winding(rng):
    mesh = scenes.sphere(1.0, 2).translated([0.5, 0.5, 0.5])
    perm = rng.permutation(mesh.n_faces)
    faces = mesh.faces[perm].copy()
    flip = rng.random(len(faces)) < 0.5
    faces[flip] = faces[flip][:, ::-1]
    other = TriangleMesh(mesh.vertices, faces)
    o, d = _random_rays_from_outside(rng, 500, radius=3.0)
    t1, _ = cast(build_accelerator(mesh), o, d, 1e-6)
    t2, _ = cast(build_accelerator(other), o, d, 1e-6)
    np.testing.assert_allclose(t1, t2, rtol=1e-12)


def test_render_depth_quad_solid_angle():
    a, b, h = 50.0, 30.0, 10.0
    quad = scenes.grid_plane((-a, a), (-b, b), 0.0)
    acc = build_accelerator(quad)
    cam = VirtualCamera(np.array([0.0, 0.0, h]), (0, 0, 0))
    dirs = fibonacci_directions(10_000)
    batch = render_depth(acc, cam, dirs)
    omega = 4.0 * np.arcsin(a * b / np.sqrt((a * a + h * h) * (b * b + h * h)))
    expected = 10_000 * omega / (4.0 * np.pi)
    assert abs(len(batch) - expected) <= 0.02 * expected
    assert np.all(batch.directions[:, 2] < 0)
    np.testing.assert_allclose(batch.hit_points()[:, 2], 0.0, atol=1e-9)
    assert np.all(np.isinf(batch.t_next))


def test_render_depth_enclosed_camera_hits_everything():
    acc = build_accelerator(scenes.cube(2.0, (-1, -1, -1)))
    cam = VirtualCamera(np.array([0.1, -0.2, 0.3]), (0, 0, 0))
    batch = render_depth(acc, cam, fibonacci_directions(10_000))
    assert len(batch) == 10_000
    assert np.all(np.isinf(batch.t_next))


def test_render_depth_records_next_hits():
    acc = build_accelerator(scenes.cube(2.0, (-1, -1, -1)), "cube")
    cam = VirtualCamera(np.array([0.0, 0.0, 5.0]), (0, 0, 0))
    batch = render_depth(acc, cam, fibonacci_directions(5000))
    assert batch.source == "cube"
    assert len(batch) > 0
    assert np.all(np.isfinite(batch.t_next))
    assert np.all(batch.t_next > batch.t_hit + EPS_SKIP)


def test_render_depth_empty_directions():
    acc = build_accelerator(scenes.cube())
    cam = VirtualCamera(np.array([5.0, 5.0, 5.0]), (0, 0, 0))
    batch = render_depth(acc, cam, DirectionSet(np.zeros((0, 3))))
    assert len(batch) == 0


def test_errors():
    with pytest.raises(MeshError):
        build_accelerator(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int)))
    with pytest.raises(ValueError):
        Ray([0, 0, 0], [0, 0, 0])


def test_ray_normalizes_direction():
    r = Ray([0, 0, 0], [0, 3, 4])
    np.testing.assert_allclose(r.direction, [0, 0.6, 0.8])
    np.testing.assert_allclose(r.at(5.0), [0, 3, 4])
