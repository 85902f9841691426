import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thybrid.errors import EmptyCloud, InvalidSpec
from thybrid.pointcloud import PointCloud
from thybrid.robot import DEFAULT_SPEC, RobotSpec
from thybrid.voxel_seg import VoxelDims, segment, voxel_dims


def test_dims_default_robot():
    d = voxel_dims(DEFAULT_SPEC)
    assert d.length == d.width == pytest.approx(math.sqrt(0.74), abs=1e-12)
    assert d.length == pytest.approx(0.8602, abs=5e-5)
    assert d.height == pytest.approx(0.2661, abs=5e-5)


def test_dims_unit_robot():
    d = voxel_dims(RobotSpec(length=1.0, width=1.0, max_slope=math.pi / 4))
    assert d.length == pytest.approx(math.sqrt(2))
    assert d.height == pytest.approx(math.sqrt(2))


def test_dims_invalid():
    with pytest.raises(InvalidSpec):
        RobotSpec(length=0.0)
    with pytest.raises(InvalidSpec):
        RobotSpec(max_slope=math.pi / 2)
    with pytest.raises(InvalidSpec):
        VoxelDims(1.0, 2.0, 1.0)


def test_empty_cloud():
    with pytest.raises(EmptyCloud):
        segment(PointCloud(np.empty((0, 3))), voxel_dims(DEFAULT_SPEC))


def _grid_points(n, extent):
    u = (np.arange(n) + 0.5) / n * extent
    x, y = np.meshgrid(u, u)
    return x.ravel(), y.ravel()


def test_canopy_excluded():
    x, y = _grid_points(40, 10.0)
    ground = np.column_stack([x, y, np.zeros_like(x)])
    dims = voxel_dims(DEFAULT_SPEC)
    # canopy stacked over the column that holds (5, 5)
    grid0 = segment(PointCloud(ground), dims)
    i, j = grid0.cell_of(5.0, 5.0)
    cx = grid0.origin[0] + (j + 0.5) * dims.length
    cy = grid0.origin[1] + (i + 0.5) * dims.length
    canopy = np.array([[cx + dx, cy + dy, 3.0] for dx in (-0.1, 0.1) for dy in (-0.1, 0.0, 0.1)])
    grid = segment(PointCloud(np.vstack([ground, canopy])), dims)
    cell = grid.cells[(i, j)]
    assert cell.excluded_count == len(canopy)
    assert np.all(cell.points[:, 2] == 0)
    assert sum(c.excluded_count for c in grid.cells.values()) == len(canopy)


def test_slope_keeps_every_point():
    x, y = _grid_points(100, 10.0)
    pts = np.column_stack([x, y, 0.2 * x])
    dims = voxel_dims(DEFAULT_SPEC)
    grid = segment(PointCloud(pts), dims, ground_percentile=0.0)
    # brute-force relief per column stays under the window height
    for cell in grid.cells.values():
        assert cell.excluded_count == 0
        z = cell.points[:, 2]
        assert z.max() - z.min() <= dims.height
    assert sum(c.retained_count for c in grid.cells.values()) == len(pts)


def test_empty_column_absent():
    pts = np.array([[0.0, 0.0, 0.0], [0.1, 0.1, 0.0], [0.2, 0.0, 0.0],
                    [5.0, 5.0, 0.0], [5.1, 5.0, 0.0], [5.0, 5.1, 0.0]])
    grid = segment(PointCloud(pts), voxel_dims(DEFAULT_SPEC))
    assert set(grid.cells) == {(0, 0), grid.cell_of(5.0, 5.0)}
    assert grid.cell_of(2.5, 2.5) not in grid.cells


def test_insufficient_columns():
    pts = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [3.0, 3.0, 0.0], [3.1, 3.0, 0.0], [3.0, 3.1, 0.0]])
    grid = segment(PointCloud(pts), voxel_dims(DEFAULT_SPEC))
    assert not grid.sufficient((0, 0))
    assert grid.sufficient(grid.cell_of(3.0, 3.0))


def test_percentile_ignores_stray_low_return():
    x, y = _grid_points(30, 0.8)
    pts = np.column_stack([x, y, np.zeros_like(x)])
    pts = np.vstack([pts, [[0.4, 0.4, -5.0]]])
    dims = voxel_dims(DEFAULT_SPEC)
    robust = segment(PointCloud(pts), dims)
    strict = segment(PointCloud(pts), dims, ground_percentile=0.0)
    assert robust.cells[(0, 0)].z_ground == pytest.approx(0.0)
    assert strict.cells[(0, 0)].z_ground == -5.0
    assert strict.cells[(0, 0)].excluded_count == len(x)


def test_windowing_off_keeps_all():
    pts = np.array([[0.0, 0.0, 0.0], [0.1, 0.1, 0.0], [0.2, 0.0, 0.0], [0.1, 0.0, 4.0]])
    grid = segment(PointCloud(pts), voxel_dims(DEFAULT_SPEC), windowing=False)
    assert grid.cells[(0, 0)].retained_count == 4


def test_occupancy_rows():
    pts = np.array([[0.0, 0.0, 0.0], [0.1, 0.1, 0.0], [0.2, 0.0, 3.0]])
    rows = list(segment(PointCloud(pts), voxel_dims(DEFAULT_SPEC)).occupancy_rows())
    assert len(rows) == 1 and rows[0][:2] == (0, 0) and rows[0][3:] == (2, 1)


clouds = st.integers(0, 2**32 - 1).map(np.random.default_rng).map(
    lambda rng: np.column_stack([rng.uniform(-5, 5, 400), rng.uniform(-5, 5, 400),
                                 rng.normal(0, 1.0, 400)]))


@given(clouds, st.sampled_from([0.0, 2.0, 50.0]))
@settings(max_examples=40, deadline=None)
def test_segment_invariants(pts, pct):
    dims = voxel_dims(DEFAULT_SPEC)
    grid = segment(PointCloud(pts), dims, ground_percentile=pct)
    seen = []
    for (i, j), cell in grid.cells.items():
        assert cell.index == (i, j)
        assert np.all(cell.points[:, 2] <= cell.z_ground + dims.height)
        # every retained point lies in the column footprint
        ci = np.floor((cell.points[:, 1] - grid.origin[1]) / dims.length)
        cj = np.floor((cell.points[:, 0] - grid.origin[0]) / dims.length)
        assert np.all(ci == i) and np.all(cj == j)
        # retained + excluded recovers the whole column
        col = pts[(np.floor((pts[:, 1] - grid.origin[1]) / dims.length) == i)
                  & (np.floor((pts[:, 0] - grid.origin[0]) / dims.length) == j)]
        assert cell.retained_count + cell.excluded_count == len(col)
        assert np.array_equal(pts[cell.point_index], cell.points)
        seen.extend(cell.point_index.tolist())
    assert len(seen) == len(set(seen))
    assert len(seen) + sum(c.excluded_count for c in grid.cells.values()) == len(pts)
