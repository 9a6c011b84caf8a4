import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from meshconflate import scenes
from meshconflate.cameras import (
    camera_range,
    fibonacci_directions,
    find_high_cell,
    sample_camera_centers,
)
from meshconflate.occupancy import HeightLayer, build_occupancy, top_height_layer


def loop_placement(top, phi):
    """Plain nested-loop transcription of the placement procedure, used as an oracle.

    Yields the (i, j, k) triples before any lifting.
    """
    p, q = top.shape

    def high(field, i, j):
        z = -1
        for ii in range(max(i - phi, 0), min(i + phi, p)):
            for jj in range(max(j - phi, 0), min(j + phi, q)):
                z = max(z, int(field[ii, jj]))
        return z

    begin = np.array([[high(top, i, j) for j in range(q)] for i in range(p)])
    out = []
    for i in range(p):
        for j in range(q):
            end = high(begin, i, j) + 1
            if end <= 0:
                continue
            out.extend((i, j, k) for k in range(begin[i, j], end))
    return out


def test_find_high_cell_constant_field():
    layer = HeightLayer(np.full((8, 8), 5))
    assert all(find_high_cell(layer, i, j, 3) == 5 for i in range(8) for j in range(8))


def test_find_high_cell_empty():
    assert find_high_cell(HeightLayer(np.full((4, 4), -1)), 2, 2, 3) == -1


def test_find_high_cell_window_is_half_open():
    top = np.array([[2, 7], [3, -1]])
    assert find_high_cell(HeightLayer(top), 1, 1, 1) == 7
    top = np.full((5, 5), 0)
    top[4, 2] = 9
    # window of (2, 2) with phi 2 is rows 0..3: row 4 excluded
    assert find_high_cell(HeightLayer(top), 2, 2, 2) == 0
    # window of (3, 2) reaches row 4
    assert find_high_cell(HeightLayer(top), 3, 2, 2) == 9


def test_flat_field_one_camera_per_column():
    layer = HeightLayer(np.zeros((10, 10), dtype=np.int64))
    begin, end = camera_range(layer, 3)
    assert np.all(begin == 0) and np.all(end == 1)
    cams = sample_camera_centers(layer, 3)
    assert len(cams) == 100
    assert {c.cell[2] for c in cams} == {0}
    # placed one cell above: centre of cell z = 1 in cell units
    assert all(c.center[2] == 1.5 for c in cams)


def test_empty_layer_no_cameras():
    assert sample_camera_centers(HeightLayer(np.full((6, 6), -1)), 3) == []


def test_tower_produces_facade_stacks():
    top = np.zeros((20, 20), dtype=np.int64)
    top[10, 10] = 10
    layer = HeightLayer(top)
    begin, end = camera_range(layer, 3)
    near = np.zeros((20, 20), dtype=bool)
    near[8:14, 8:14] = True  # windows [i-3, i+3) that contain index 10
    assert np.all(begin[near] == 10) and np.all(begin[~near] == 0)
    ring = np.zeros((20, 20), dtype=bool)
    ring[6:17, 6:17] = True
    ring &= ~near
    assert np.all(end[ring] == 11)
    cams = sample_camera_centers(layer, 3)
    stacks = {}
    for c in cams:
        stacks.setdefault(c.cell[:2], []).append(c.cell[2])
    assert sorted(stacks[(6, 10)]) == list(range(11))
    assert sorted(stacks[(16, 16)]) == list(range(11))
    assert stacks[(0, 0)] == [0]
    assert stacks[(10, 10)] == [10]


@settings(max_examples=60, deadline=None)
@given(
    top=arrays(np.int64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(-1, 8)),
    phi=st.integers(1, 4),
)
def test_placement_matches_loop_oracle(top, phi):
    cams = sample_camera_centers(HeightLayer(top), phi)
    assert sorted(c.cell for c in cams) == sorted(loop_placement(top, phi))


@settings(max_examples=60, deadline=None)
@given(
    top=arrays(np.int64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(-1, 8)),
    phi=st.integers(1, 4),
)
def test_begin_monotone_in_phi(top, phi):
    b1, _ = camera_range(HeightLayer(top), phi)
    b2, _ = camera_range(HeightLayer(top), phi + 1)
    assert np.all(b2 >= b1)


def test_bad_phi():
    with pytest.raises(ValueError):
        camera_range(HeightLayer(np.zeros((3, 3), dtype=np.int64)), 0)


def test_cameras_in_free_cells_town():
    grid = build_occupancy([scenes.town()], 2.0)
    cams = sample_camera_centers(top_height_layer(grid), 3, grid)
    assert len(cams) > 0
    for c in cams:
        ijk = grid.cell_of(c.center)[0]
        assert not grid.is_occupied(ijk)
        np.testing.assert_allclose(grid.cell_center(ijk), c.center)


def test_floating_object_gets_cameras_below_it():
    # wide padding: the outer columns are empty but within reach of the object
    grid = build_occupancy([scenes.cube(2.0)], 0.4, padding=4)
    layer = top_height_layer(grid)
    cams = sample_camera_centers(layer, 3, grid)
    z = np.array([c.center[2] for c in cams])
    assert z.min() < 0.0 < z.max()


def test_placement_deterministic():
    grid = build_occupancy([scenes.town()], 2.0)
    layer = top_height_layer(grid)
    a = np.array([c.center for c in sample_camera_centers(layer, 3, grid)])
    b = np.array([c.center for c in sample_camera_centers(layer, 3, grid)])
    assert np.array_equal(a, b)


def test_fibonacci_single():
    d = fibonacci_directions(1).directions
    assert d.shape == (1, 3)
    assert d[0, 2] == 0.0
    assert abs(np.linalg.norm(d[0]) - 1) <= 1e-12


def _min_angle(d):
    g = np.clip(d @ d.T, -1, 1)
    np.fill_diagonal(g, -1)
    return float(np.arccos(g.max()))


@pytest.mark.parametrize("n", [2, 7, 100, 1000])
def test_fibonacci_unit_and_distinct(n):
    d = fibonacci_directions(n).directions
    assert np.all(np.abs(np.linalg.norm(d, axis=1) - 1) <= 1e-12)
    assert len(np.unique(d, axis=0)) == n


def test_fibonacci_1000_uniformity():
    ds = fibonacci_directions(1000)
    assert ds.count == 1000
    d = ds.directions
    assert np.linalg.norm(d.mean(axis=0)) <= 0.01
    assert _min_angle(d) >= 0.6 * np.sqrt(4 * np.pi / 1000)


def test_fibonacci_formula():
    n = 5
    d = fibonacci_directions(n).directions
    i = 3
    z = 1 - 2 * (i + 0.5) / n
    az = i * np.pi * (3 - np.sqrt(5))
    np.testing.assert_allclose(d[i], [np.sqrt(1 - z * z) * np.cos(az), np.sqrt(1 - z * z) * np.sin(az), z], atol=1e-15)
    with pytest.raises(ValueError):
        fibonacci_directions(0)
