"""Two-phase terrain assessment: coarse plane fits, fine roughness cells,
static traversability, and the resulting hybrid map."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateCell, EmptyCloud
from .hybrid_map import OBSTACLE, TERRAIN, UNKNOWN, HybridMap
from .pointcloud import PointCloud
from .robot import RobotSpec
from .voxel_seg import CoarseGrid, segment, voxel_dims

DEFAULT_FINE_RESOLUTION = 0.5


class CoarseClass(enum.Enum):
    STEEP = "steep"
    TRAVERSABLE = "traversable"


@dataclass(frozen=True, eq=False)
class FittedPlane:
    centroid: np.ndarray
    normal: np.ndarray
    slope: float
    eigenvalues: np.ndarray

    def signed_distance(self, points) -> np.ndarray:
        return _signed_distance(np.asarray(points, dtype=float), self.centroid, self.normal)


@dataclass(frozen=True)
class FineCellStats:
    h: float
    r_sum: float
    n: int

    @property
    def mean_abs_residual(self) -> float:
        return self.r_sum / self.n


def _signed_distance(pts, centroid, normal):
    # explicit x + y + z order keeps results identical to a scalar loop
    c = pts - centroid
    n = np.broadcast_to(normal, c.shape)
    return c[..., 0] * n[..., 0] + c[..., 1] * n[..., 1] + c[..., 2] * n[..., 2]


def fit_plane(points) -> FittedPlane:
    """Least-squares plane through ``points`` by PCA.

    The normal is the eigenvector of the scatter matrix with the smallest
    eigenvalue, flipped so that its z component is non-negative.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise DegenerateCell(f"need at least 3 points, got {len(pts)}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    scatter = centered.T @ centered
    evals, evecs = np.linalg.eigh(scatter)
    scale = max(abs(evals[2]), np.finfo(float).tiny)
    if evals[2] <= 0 or evals[1] <= 1e-12 * scale:
        raise DegenerateCell("points are collinear or coincident")
    normal = evecs[:, 0]
    normal = normal / np.linalg.norm(normal)
    if normal[2] < 0 or (normal[2] == 0 and (normal[0], normal[1]) < (0.0, 0.0)):
        normal = -normal
    slope = math.acos(min(1.0, max(-1.0, float(normal[2]))))
    centroid.setflags(write=False)
    normal.setflags(write=False)
    return FittedPlane(centroid, normal, slope, evals)


def classify_coarse(plane: FittedPlane, spec: RobotSpec) -> CoarseClass:
    return CoarseClass.STEEP if plane.slope > spec.max_slope else CoarseClass.TRAVERSABLE


def fine_stats(points, plane: FittedPlane) -> FineCellStats:
    """Signed-distance spread ``h`` and absolute residual sum ``r_sum``."""
    d = plane.signed_distance(np.asarray(points, dtype=float).reshape(-1, 3))
    if len(d) == 0:
        raise ValueError("fine cell has no points")
    return FineCellStats(float(d.max() - d.min()), math.fsum(np.abs(d).tolist()), len(d))


def static_traversability(stats: FineCellStats, slope: float, spec: RobotSpec,
                          max_roughness: float | None = None) -> float:
    """Heading-independent traversability; 0 marks a step obstacle."""
    r_max = spec.max_roughness if max_roughness is None else max_roughness
    if stats.h > spec.max_step:
        return 0.0
    tau = (1.0
           - spec.static_roughness_weight * stats.r_sum / r_max
           - spec.static_slope_weight * slope / spec.max_slope)
    return min(1.0, max(0.0, tau))


@dataclass(frozen=True, eq=False)
class Assessment:
    """Everything ``assess`` produced, beyond the map itself."""

    map: HybridMap
    planes: dict          # coarse index -> FittedPlane, or None if degenerate
    max_roughness: float
    mean_fine_count: float


def assess(cells: CoarseGrid, spec: RobotSpec,
           fine_resolution: float = DEFAULT_FINE_RESOLUTION,
           max_roughness: float | None = None) -> HybridMap:
    return assess_full(cells, spec, fine_resolution, max_roughness).map


def assess_full(cells: CoarseGrid, spec: RobotSpec,
                fine_resolution: float = DEFAULT_FINE_RESOLUTION,
                max_roughness: float | None = None) -> Assessment:
    """Build the hybrid map from segmented coarse columns.

    Each fine cell takes its plane from the coarse column containing the fine
    cell's center; residuals of all retained points inside the fine cell are
    measured against that plane. When neither ``max_roughness`` nor
    ``spec.max_roughness`` is set, it defaults to ``max_step`` times the mean
    point count of non-empty fine cells.
    """
    if not 0 < fine_resolution <= cells.size:
        raise ValueError("fine_resolution must be in (0, coarse cell size]")
    res = float(fine_resolution)
    ox, oy = cells.origin
    cols = int(math.floor((cells.upper[0] - ox) / res)) + 1
    rows = int(math.floor((cells.upper[1] - oy) / res)) + 1

    planes = {}
    for index in cells.cells:
        if not cells.sufficient(index):
            planes[index] = None
            continue
        try:
            planes[index] = fit_plane(cells.cells[index].points)
        except DegenerateCell:
            planes[index] = None

    # per fine cell: status of the owning coarse column and its plane
    jj, ii = np.meshgrid(np.arange(cols), np.arange(rows))
    cx = ox + (jj + 0.5) * res
    cy = oy + (ii + 0.5) * res
    owner_i = np.floor((cy - oy) / cells.size).astype(np.int64)
    owner_j = np.floor((cx - ox) / cells.size).astype(np.int64)
    status = np.zeros((rows, cols), np.uint8)  # 0 no plane, 1 steep, 2 traversable
    centroid = np.zeros((rows, cols, 3))
    normal = np.zeros((rows, cols, 3))
    slope = np.zeros((rows, cols))
    for r in range(rows):
        for c in range(cols):
            key = (int(owner_i[r, c]), int(owner_j[r, c]))
            plane = planes.get(key)
            if plane is None:
                continue
            centroid[r, c] = plane.centroid
            normal[r, c] = plane.normal
            slope[r, c] = plane.slope
            status[r, c] = 1 if classify_coarse(plane, spec) is CoarseClass.STEEP else 2

    pts = cells.retained_points()
    pj = np.floor((pts[:, 0] - ox) / res).astype(np.int64)
    pi = np.floor((pts[:, 1] - oy) / res).astype(np.int64)
    flat = pi * cols + pj
    n_cells = rows * cols
    count = np.bincount(flat, minlength=n_cells)
    nonempty = count > 0
    mean_count = float(count[nonempty].mean()) if nonempty.any() else 0.0
    r_max = max_roughness if max_roughness is not None else spec.max_roughness
    if r_max is None:
        r_max = spec.max_step * mean_count
    if not r_max > 0:
        raise ValueError("could not derive a positive max_roughness")

    d = _signed_distance(pts, centroid[pi, pj], normal[pi, pj])
    d_max = np.full(n_cells, -np.inf)
    d_min = np.full(n_cells, np.inf)
    np.maximum.at(d_max, flat, d)
    np.minimum.at(d_min, flat, d)
    r_sum = np.bincount(flat, weights=np.abs(d), minlength=n_cells)
    z_sum = np.bincount(flat, weights=pts[:, 2], minlength=n_cells)

    count = count.reshape(rows, cols)
    h = (d_max - d_min).reshape(rows, cols)
    r_sum = r_sum.reshape(rows, cols)
    elev = (z_sum.reshape(rows, cols) / np.maximum(count, 1))

    kind = np.full((rows, cols), UNKNOWN, np.uint8)
    tau = np.full((rows, cols), np.nan)
    out_normal = np.full((rows, cols, 3), np.nan)
    out_r = np.full((rows, cols), np.nan)
    out_elev = np.full((rows, cols), np.nan)

    steep = status == 1
    kind[steep] = OBSTACLE
    candidate = (status == 2) & (count > 0)
    step = candidate & (h > spec.max_step)
    kind[step] = OBSTACLE
    terrain = candidate & ~step
    kind[terrain] = TERRAIN
    tau[kind == OBSTACLE] = 0.0
    t = (1.0
         - spec.static_roughness_weight * r_sum / r_max
         - spec.static_slope_weight * slope / spec.max_slope)
    tau[terrain] = np.clip(t[terrain], 0.0, 1.0)
    # a terrain cell clamped to tau = 0 is as impassable as a step
    dead = terrain & (tau == 0.0)
    kind[dead] = OBSTACLE
    terrain = terrain & ~dead
    out_normal[terrain] = normal[terrain]
    out_r[terrain] = r_sum[terrain]
    out_elev[terrain] = elev[terrain]

    hmap = HybridMap((ox, oy), res, kind, tau, out_normal, out_r, out_elev, r_max)
    return Assessment(hmap, planes, float(r_max), mean_count)


class TerrainAssessor(BaseEstimator):
    """Point cloud -> hybrid map, as an estimator.

    ``fit`` takes an ``(n, 3)`` array (or a :class:`PointCloud`) and stores the
    map in ``map_``; ``predict`` returns static traversability at query
    ``(x, y)`` rows (NaN where unknown).
    """

    def __init__(self, spec=None, fine_resolution=DEFAULT_FINE_RESOLUTION,
                 ground_percentile=2.0, windowing=True, min_points=3,
                 max_roughness=None):
        self.spec = spec
        self.fine_resolution = fine_resolution
        self.ground_percentile = ground_percentile
        self.windowing = windowing
        self.min_points = min_points
        self.max_roughness = max_roughness

    def _spec(self):
        return self.spec if self.spec is not None else RobotSpec()

    def fit(self, X, y=None):
        if isinstance(X, PointCloud):
            X = X.points
        if len(X) == 0:
            raise EmptyCloud("cannot assess an empty point cloud")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise ValueError(f"expected (n, 3) points, got shape {X.shape}")
        spec = self._spec()
        self.dims_ = voxel_dims(spec)
        self.grid_ = segment(PointCloud(X), self.dims_, self.ground_percentile,
                             self.windowing, self.min_points)
        result = assess_full(self.grid_, spec, self.fine_resolution, self.max_roughness)
        self.map_ = result.map
        self.planes_ = result.planes
        self.max_roughness_ = result.max_roughness
        self.mean_fine_count_ = result.mean_fine_count
        return self

    def predict(self, X):
        check_is_fitted(self, "map_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] < 2:
            raise ValueError("expected (n, 2) query coordinates")
        out = np.empty(len(X))
        for k, (x, y) in enumerate(X[:, :2]):
            i, j = self.map_.cell_index(x, y)
            out[k] = self.map_.tau[i, j] if self.map_.in_bounds(i, j) else np.nan
        return out

    def coarse_plane_at(self, x, y):
        """Fitted coarse plane for the column containing (x, y), or None."""
        check_is_fitted(self, "planes_")
        return self.planes_.get(self.grid_.cell_of(x, y))
