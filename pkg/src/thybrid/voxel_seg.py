"""Dynamic coarse voxel segmentation.

The XY plane is tiled with square columns large enough to hold the whole
robot. In each column only a single vertical window of height
``G_l * tan(max_slope)`` resting on the local ground is kept, which drops
overhanging structure such as canopy or bridges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloud, InvalidSpec
from .pointcloud import PointCloud
from .robot import RobotSpec


@dataclass(frozen=True)
class VoxelDims:
    length: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.length > 0 and self.length == self.width and self.height > 0):
            raise InvalidSpec("voxel dims need length == width > 0 and height > 0")


def voxel_dims(spec: RobotSpec) -> VoxelDims:
    if not (spec.length > 0 and spec.width > 0):
        raise InvalidSpec("robot length and width must be positive")
    if not 0 < spec.max_slope < math.pi / 2:
        raise InvalidSpec("max_slope must lie in (0, pi/2)")
    side = math.sqrt(spec.length ** 2 + spec.width ** 2)
    return VoxelDims(side, side, side * math.tan(spec.max_slope))


@dataclass(frozen=True, eq=False)
class CoarseCell:
    index: tuple            # (i, j): i counts rows along y, j columns along x
    z_ground: float
    points: np.ndarray      # retained points, (n, 3)
    point_index: np.ndarray # row numbers of the retained points in the source cloud
    excluded_count: int

    @property
    def retained_count(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class CoarseGrid:
    origin: tuple           # (x, y) of the cloud's min corner
    upper: tuple            # (x, y) of the cloud's max corner
    size: float             # G_l
    shape: tuple            # (rows, cols)
    dims: VoxelDims
    cells: dict             # (i, j) -> CoarseCell; empty columns absent
    min_points: int = 3

    def cell_of(self, x, y):
        """Index of the column containing (x, y), whether or not it has data."""
        return (int(math.floor((y - self.origin[1]) / self.size)),
                int(math.floor((x - self.origin[0]) / self.size)))

    def sufficient(self, index) -> bool:
        cell = self.cells.get(index)
        return cell is not None and cell.retained_count >= self.min_points

    def retained_points(self) -> np.ndarray:
        if not self.cells:
            return np.empty((0, 3))
        return np.concatenate([c.points for c in self.cells.values()])

    def occupancy_rows(self):
        """Rows for the CSV debug export: i, j, z_ground, retained, excluded."""
        for (i, j), c in sorted(self.cells.items()):
            yield i, j, c.z_ground, c.retained_count, c.excluded_count


def _column_keys(points, origin, size):
    j = np.floor((points[:, 0] - origin[0]) / size).astype(np.int64)
    i = np.floor((points[:, 1] - origin[1]) / size).astype(np.int64)
    return i, j


def segment(cloud: PointCloud, dims: VoxelDims, ground_percentile: float = 2.0,
            windowing: bool = True, min_points: int = 3) -> CoarseGrid:
    """Split ``cloud`` into single-layer coarse columns.

    ``z_ground`` is the ``ground_percentile``-th percentile of z in the column
    (0 gives the strict minimum). Points above ``z_ground + dims.height`` are
    excluded. With ``windowing=False`` every point is kept, which is only
    useful to demonstrate what the window protects against.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot segment an empty cloud")
    if not 0 <= ground_percentile <= 100:
        raise ValueError("ground_percentile must be within [0, 100]")
    pts = cloud.points
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    origin = (float(lo[0]), float(lo[1]))
    size = dims.length
    i, j = _column_keys(pts, origin, size)
    rows, cols = int(i.max()) + 1, int(j.max()) + 1
    key = i * cols + j
    order = np.argsort(key, kind="stable")
    uniq, starts = np.unique(key[order], return_index=True)
    ends = np.append(starts[1:], len(order))

    cells = {}
    for k, s, e in zip(uniq.tolist(), starts.tolist(), ends.tolist()):
        idx = order[s:e]
        z = pts[idx, 2]
        z_ground = float(np.percentile(z, ground_percentile)) if ground_percentile > 0 else float(z.min())
        if windowing:
            keep = z <= z_ground + dims.height
        else:
            keep = np.ones(len(idx), dtype=bool)
        kept = idx[keep]
        cell_points = pts[kept]
        cell_points.setflags(write=False)
        index = (k // cols, k % cols)
        cells[index] = CoarseCell(index, z_ground, cell_points, kept, int((~keep).sum()))
    return CoarseGrid(origin, (float(hi[0]), float(hi[1])), size, (rows, cols), dims, cells, min_points)
