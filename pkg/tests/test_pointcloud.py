import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thybrid.errors import EmptyCloudWarning, FormatError, InvalidTransform
from thybrid.pointcloud import (PointCloud, detect_format, invert_transform, load, save,
                                transform)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_line_csv(tmp_path):
    cloud = load(_write(tmp_path, "a.csv", "0,0,0\n1,0,0\n0,1,0\n"), "xyz-csv")
    assert len(cloud) == 3
    lo, hi = cloud.bounds
    assert lo.tolist() == [0, 0, 0]
    assert hi.tolist() == [1, 1, 0]


def test_load_pcd_two_points(tmp_path):
    text = ("# .PCD v0.7\nVERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
            "WIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA ascii\n1 2 3\n4 5 6\n")
    cloud = load(_write(tmp_path, "a.pcd", text))
    assert cloud.points.tolist() == [[1, 2, 3], [4, 5, 6]]


def test_pcd_extra_fields_ignored(tmp_path):
    text = ("VERSION 0.7\nFIELDS intensity x y z\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\n"
            "WIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA ascii\n9 1 2 3\n")
    cloud = load(_write(tmp_path, "b.pcd", text))
    assert cloud.points.tolist() == [[1, 2, 3]]


def test_load_ply(tmp_path):
    text = ("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
            "property float z\nproperty uchar red\nend_header\n0 0 1 255\n2 3 4 0\n")
    cloud = load(_write(tmp_path, "c.ply", text))
    assert cloud.points.tolist() == [[0, 0, 1], [2, 3, 4]]


def test_nan_row_strict_vs_lenient(tmp_path):
    p = _write(tmp_path, "n.csv", "1,2,3\n0,0,nan\n")
    with pytest.raises(FormatError) as err:
        load(p, strict=True)
    assert err.value.line == 2
    cloud = load(p)
    assert len(cloud) == 1
    assert cloud.report.rejected_nonfinite == 1
    assert cloud.report.rejected_lines == (2,)


def test_comments_and_blank_lines(tmp_path):
    cloud = load(_write(tmp_path, "c.csv", "# header\n\n1,2,3 # trailing\n"))
    assert cloud.points.tolist() == [[1, 2, 3]]


def test_bad_row_reports_line(tmp_path):
    with pytest.raises(FormatError, match="line 2"):
        load(_write(tmp_path, "bad.csv", "1,2,3\n1,2\n"))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load(tmp_path / "nope.csv")


def test_empty_cloud_only_warns(tmp_path):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cloud = load(_write(tmp_path, "e.csv", "# nothing\n"))
    assert len(cloud) == 0 and cloud.bounds is None
    assert any(issubclass(w.category, EmptyCloudWarning) for w in caught)


def test_detect_format_by_header(tmp_path):
    assert detect_format(_write(tmp_path, "x.dat", "ply\n")) == "ply-ascii"
    assert detect_format(_write(tmp_path, "y.dat", "VERSION 0.7\n")) == "pcd-ascii"
    assert detect_format(_write(tmp_path, "z.dat", "1 2 3\n")) == "xyz-csv"


def test_cloud_is_read_only():
    cloud = PointCloud([[1, 2, 3]])
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 5


def test_transform_examples():
    c = PointCloud([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    assert transform(c, np.eye(4)) == c
    moved = transform(c, (np.eye(3), (1, 0, 0)))
    assert moved.points[0].tolist() == [1, 0, 0]
    yaw = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])
    turned = transform(c, (yaw, (0, 0, 0)))
    assert np.allclose(turned.points[1], [0, 1, 0], atol=1e-12, rtol=0)


def test_transform_rejects_bad_rotation():
    with pytest.raises(InvalidTransform):
        transform(PointCloud([[0, 0, 0]]), (np.diag([1.0, 1.0, 1.01]), (0, 0, 0)))
    with pytest.raises(InvalidTransform):
        transform(PointCloud([[0, 0, 0]]), (np.diag([1.0, 1.0, -1.0]), (0, 0, 0)))


def _rotation(a, b, c):
    ca, sa, cb, sb, cc, sc = math.cos(a), math.sin(a), math.cos(b), math.sin(b), math.cos(c), math.sin(c)
    rz = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rx = np.array([[1, 0, 0], [0, cc, -sc], [0, sc, cc]])
    return rz @ ry @ rx


coords = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)),
                elements=st.floats(-1e3, 1e3, allow_nan=False))
angle = st.floats(-math.pi, math.pi)


@given(coords, angle, angle, angle, st.tuples(*[st.floats(-100, 100)] * 3))
@settings(max_examples=60, deadline=None)
def test_transform_inverse_round_trip(pts, a, b, c, t):
    cloud = PointCloud(pts)
    rig = (_rotation(a, b, c), t)
    back = transform(transform(cloud, rig), invert_transform(rig))
    assert np.max(np.abs(back.points - cloud.points)) <= 1e-9


@given(coords)
@settings(max_examples=40, deadline=None)
def test_bounds_enclose_points(pts):
    cloud = PointCloud(pts)
    lo, hi = cloud.bounds
    assert np.all(cloud.points >= lo) and np.all(cloud.points <= hi)
    assert np.array_equal(lo, pts.min(axis=0)) and np.array_equal(hi, pts.max(axis=0))


@pytest.mark.parametrize("suffix", [".csv", ".pcd", ".ply"])
@given(pts=coords)
@settings(max_examples=25, deadline=None)
def test_save_load_round_trip(tmp_path_factory, suffix, pts):
    path = tmp_path_factory.mktemp("rt") / f"cloud{suffix}"
    cloud = PointCloud(pts)
    save(cloud, path)
    back = load(path)
    assert len(back) == len(cloud)
    assert np.array_equal(back.points, cloud.points)
