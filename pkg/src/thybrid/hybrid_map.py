"""Hybrid 2D-obstacle / 2.5D-terrain raster.

Cell ``(i, j)`` spans ``[ox + j*res, ox + (j+1)*res) x [oy + i*res, oy + (i+1)*res)``;
row ``i`` grows with y. Obstacle cells keep only the single static layer
(tau = 0); terrain cells also carry a unit normal, roughness and elevation.
"""
from __future__ import annotations

import json
import math
import os
import struct
import threading
import zlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import CorruptFile, VersionMismatch

UNKNOWN, TERRAIN, OBSTACLE = 0, 1, 2
KIND_NAMES = {UNKNOWN: "unknown", TERRAIN: "terrain", OBSTACLE: "obstacle"}

MAGIC = b"THMAP\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<dddIId")


@dataclass(frozen=True)
class CellState:
    kind: str
    normal: tuple | None = None
    r_sum: float | None = None
    tau: float | None = None
    elevation: float | None = None

    @property
    def is_obstacle(self):
        return self.kind == "obstacle"

    @property
    def is_terrain(self):
        return self.kind == "terrain"


OBSTACLE_CELL = CellState("obstacle", tau=0.0)
UNKNOWN_CELL = CellState("unknown")


class HybridMap:
    """Immutable layered raster. Layer arrays are read-only after construction."""

    def __init__(self, origin, resolution, kind, tau, normal, r_sum, elevation,
                 max_roughness=None):
        self.origin = (float(origin[0]), float(origin[1]))
        self.resolution = float(resolution)
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        kind = np.ascontiguousarray(kind, dtype=np.uint8)
        rows, cols = kind.shape
        self.kind = kind
        self.tau = np.ascontiguousarray(tau, dtype=np.float32).reshape(rows, cols)
        self.normal = np.ascontiguousarray(normal, dtype=np.float32).reshape(rows, cols, 3)
        self.r_sum = np.ascontiguousarray(r_sum, dtype=np.float32).reshape(rows, cols)
        self.elevation = np.ascontiguousarray(elevation, dtype=np.float32).reshape(rows, cols)
        self.max_roughness = None if max_roughness is None else float(max_roughness)
        for arr in self._layers():
            arr.setflags(write=False)
        self._lock = threading.Lock()
        self._distance = None
        # per-map memo for derived planner data (grid graphs, goal fields)
        self._cache = {}

    @classmethod
    def empty(cls, origin, resolution, shape, max_roughness=None):
        """All-unknown map, handy as a builder starting point."""
        rows, cols = shape
        nan = np.float32(np.nan)
        return cls(origin, resolution, np.zeros(shape, np.uint8),
                   np.full(shape, nan), np.full((rows, cols, 3), nan),
                   np.full(shape, nan), np.full(shape, nan), max_roughness)

    def _layers(self):
        return (self.kind, self.tau, self.normal, self.r_sum, self.elevation)

    @property
    def shape(self):
        return self.kind.shape

    @property
    def height(self):
        return self.kind.shape[0]

    @property
    def width(self):
        return self.kind.shape[1]

    @property
    def extent(self):
        """``(xmin, xmax, ymin, ymax)``."""
        ox, oy = self.origin
        return (ox, ox + self.width * self.resolution, oy, oy + self.height * self.resolution)

    def __eq__(self, other):
        if not isinstance(other, HybridMap):
            return NotImplemented
        if (self.origin, self.resolution, self.shape) != (other.origin, other.resolution, other.shape):
            return False
        if self.max_roughness != other.max_roughness:
            return False
        return all(a.tobytes() == b.tobytes() for a, b in zip(self._layers(), other._layers()))

    __hash__ = None

    def __getstate__(self):
        # the lock and memo do not travel to worker processes
        state = self.__dict__.copy()
        del state["_lock"]
        state["_cache"] = {}
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()
        for arr in self._layers():
            arr.setflags(write=False)
        if self._distance is not None:
            self._distance.setflags(write=False)

    # -- indexing -----------------------------------------------------------

    def cell_index(self, x, y):
        """Row/col containing (x, y); may be out of bounds."""
        return (math.floor((y - self.origin[1]) / self.resolution),
                math.floor((x - self.origin[0]) / self.resolution))

    def in_bounds(self, i, j):
        return 0 <= i < self.height and 0 <= j < self.width

    def cell_center(self, i, j):
        res = self.resolution
        return (self.origin[0] + (j + 0.5) * res, self.origin[1] + (i + 0.5) * res)

    def cell_state(self, i, j) -> CellState:
        if not self.in_bounds(i, j):
            return UNKNOWN_CELL
        k = self.kind[i, j]
        if k == OBSTACLE:
            return OBSTACLE_CELL
        if k == UNKNOWN:
            return UNKNOWN_CELL
        return CellState("terrain", tuple(float(c) for c in self.normal[i, j]),
                         float(self.r_sum[i, j]), float(self.tau[i, j]),
                         float(self.elevation[i, j]))

    def query(self, x, y) -> CellState:
        return self.cell_state(*self.cell_index(x, y))

    def counts(self) -> dict:
        return {name: int((self.kind == k).sum()) for k, name in KIND_NAMES.items()}

    # -- obstacle distance --------------------------------------------------

    @property
    def distance_field(self) -> np.ndarray:
        """Exact Euclidean distance (m) from each cell center to the nearest
        obstacle cell center; +inf everywhere when there are no obstacles.
        Built once, on first use."""
        if self._distance is None:
            with self._lock:
                if self._distance is None:
                    field = exact_edt(self.kind == OBSTACLE, self.resolution)
                    field.setflags(write=False)
                    self._distance = field
        return self._distance

    def distance_to_obstacle(self, x, y) -> float:
        i, j = self.cell_index(x, y)
        if not self.in_bounds(i, j):
            i = min(max(i, 0), self.height - 1)
            j = min(max(j, 0), self.width - 1)
        return float(self.distance_field[i, j])

    def check_invariants(self):
        """Raise AssertionError if the layer invariants are violated."""
        obst = self.kind == OBSTACLE
        terr = self.kind == TERRAIN
        assert np.all(self.tau[obst] == 0)
        assert np.all(np.isnan(self.normal[obst])) and np.all(np.isnan(self.r_sum[obst]))
        n = self.normal[terr].astype(np.float64)
        assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-6) if len(n) else True
        t = self.tau[terr]
        assert np.all((t >= 0) & (t <= 1))
        assert np.array_equal(self.distance_field == 0, obst)


def exact_edt(mask, resolution=1.0) -> np.ndarray:
    """Exact Euclidean distance transform of a boolean obstacle mask.

    The nearest-feature indices come from scipy; distances are then formed from
    the integer squared offsets so the result is reproducible bit for bit.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.full(mask.shape, np.inf)
    _, (ii, jj) = ndimage.distance_transform_edt(~mask, return_indices=True)
    rows, cols = np.indices(mask.shape)
    d2 = (rows - ii).astype(np.int64) ** 2 + (cols - jj).astype(np.int64) ** 2
    return np.sqrt(d2.astype(np.float64)) * resolution


# -- serialization ---------------------------------------------------------

def save(hmap: HybridMap, path, spec=None) -> None:
    """Write the versioned binary map; ``spec`` (a RobotSpec) goes to a JSON
    sidecar at ``path + '.json'``."""
    path = os.fspath(path)
    rmax = math.nan if hmap.max_roughness is None else hmap.max_roughness
    parts = [
        MAGIC,
        bytes([FORMAT_VERSION]),
        _HEADER.pack(hmap.origin[0], hmap.origin[1], hmap.resolution,
                     hmap.width, hmap.height, rmax),
        hmap.kind.tobytes(),
        hmap.tau.astype("<f4").tobytes(),
        hmap.normal.astype("<f4").tobytes(),
        hmap.r_sum.astype("<f4").tobytes(),
        hmap.elevation.astype("<f4").tobytes(),
    ]
    payload = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))
    if spec is not None:
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump({"format_version": FORMAT_VERSION, "robot": spec.to_dict()},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")


def load(path) -> HybridMap:
    path = os.fspath(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    head = len(MAGIC) + 1
    if len(blob) < head or blob[:len(MAGIC)] != MAGIC:
        raise CorruptFile(f"{path}: not a hybrid map file")
    version = blob[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(blob) < head + _HEADER.size + 4:
        raise CorruptFile(f"{path}: truncated header")
    ox, oy, res, width, height, rmax = _HEADER.unpack_from(blob, head)
    n = width * height
    expected = head + _HEADER.size + n * (1 + 4 + 12 + 4 + 4) + 4
    if len(blob) != expected:
        raise CorruptFile(f"{path}: size {len(blob)} bytes, expected {expected}")
    (crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) != crc:
        raise CorruptFile(f"{path}: checksum mismatch")
    offset = head + _HEADER.size

    def take(dtype, count, shape):
        nonlocal offset
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape)
        offset += arr.nbytes
        return arr.copy()

    kind = take(np.uint8, n, (height, width))
    tau = take("<f4", n, (height, width))
    normal = take("<f4", 3 * n, (height, width, 3))
    r_sum = take("<f4", n, (height, width))
    elevation = take("<f4", n, (height, width))
    return HybridMap((ox, oy), res, kind, tau, normal, r_sum, elevation,
                     None if math.isnan(rmax) else rmax)


def load_sidecar(path):
    """RobotSpec stored next to a map file, or None."""
    from .robot import RobotSpec

    side = os.fspath(path) + ".json"
    if not os.path.exists(side):
        return None
    with open(side, encoding="utf-8") as fh:
        return RobotSpec.from_dict(json.load(fh)["robot"])


def render(hmap: HybridMap, path, paths=(), labels=None, scale=4) -> None:
    """Write a PPM or SVG picture of the map; see :mod:`thybrid.render`."""
    from .render import render as _render

    _render(hmap, path, paths, labels, scale)
