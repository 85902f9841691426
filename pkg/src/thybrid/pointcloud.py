"""Point cloud container and ASCII readers/writers (xyz-csv, PCD, PLY)."""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyCloudWarning, FormatError, InvalidTransform

FORMATS = ("xyz-csv", "pcd-ascii", "ply-ascii")

_SUFFIX_FORMATS = {
    ".csv": "xyz-csv",
    ".xyz": "xyz-csv",
    ".txt": "xyz-csv",
    ".pcd": "pcd-ascii",
    ".ply": "ply-ascii",
}


@dataclass(frozen=True)
class ParseReport:
    path: str
    format: str
    rows: int
    rejected_nonfinite: int
    rejected_lines: tuple = ()


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Immutable (n, 3) array of points in the map frame, z up."""

    points: np.ndarray
    report: ParseReport | None = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    __hash__ = None

    @property
    def bounds(self):
        """``(min_xyz, max_xyz)`` or ``None`` for an empty cloud."""
        if len(self) == 0:
            return None
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    @property
    def z(self):
        return self.points[:, 2]


def detect_format(path) -> str:
    path = Path(path)
    fmt = _SUFFIX_FORMATS.get(path.suffix.lower())
    if fmt is not None:
        return fmt
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        head = fh.readline().strip().lower()
    if head == "ply":
        return "ply-ascii"
    if head.startswith("# .pcd") or head.startswith("version"):
        return "pcd-ascii"
    return "xyz-csv"


def load(path, format: str = "auto", strict: bool = False) -> PointCloud:
    """Read a point cloud from an ASCII file.

    Rows with NaN/Inf coordinates raise :class:`FormatError` in strict mode and
    are dropped (and counted in ``cloud.report``) otherwise. An empty result
    only warns.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if format == "auto":
        format = detect_format(path)
    readers = {"xyz-csv": _read_xyz, "pcd-ascii": _read_pcd, "ply-ascii": _read_ply}
    if format not in readers:
        raise ValueError(f"unknown point cloud format {format!r}")
    with open(path, "r", encoding="ascii", errors="strict") as fh:
        try:
            lines = fh.read().splitlines()
        except UnicodeDecodeError as exc:
            raise FormatError(f"not an ASCII file: {exc}") from None
    rows = readers[format](lines)

    kept, rejected = [], []
    for lineno, xyz in rows:
        if all(np.isfinite(xyz)):
            kept.append(xyz)
        elif strict:
            raise FormatError("non-finite coordinate", line=lineno)
        else:
            rejected.append(lineno)
    pts = np.array(kept, dtype=np.float64).reshape(-1, 3)
    report = ParseReport(path, format, len(rows), len(rejected), tuple(rejected))
    if len(pts) == 0:
        warnings.warn(f"{path}: point cloud is empty", EmptyCloudWarning, stacklevel=2)
    return PointCloud(pts, report=report)


def save(cloud: PointCloud, path, format: str = "auto") -> None:
    """Write ``cloud`` as ASCII. Values are printed with 17 significant digits
    so that a reload reproduces every coordinate bit for bit."""
    path = os.fspath(path)
    if format == "auto":
        format = _SUFFIX_FORMATS.get(Path(path).suffix.lower(), "xyz-csv")
    n = len(cloud)
    body = [f"{x!r},{y!r},{z!r}" if format == "xyz-csv" else f"{x!r} {y!r} {z!r}"
            for x, y, z in cloud.points.tolist()]
    if format == "xyz-csv":
        header = ["# x,y,z"]
    elif format == "pcd-ascii":
        header = [
            "# .PCD v0.7 - Point Cloud Data file format",
            "VERSION 0.7",
            "FIELDS x y z",
            "SIZE 8 8 8",
            "TYPE F F F",
            "COUNT 1 1 1",
            f"WIDTH {n}",
            "HEIGHT 1",
            "VIEWPOINT 0 0 0 1 0 0 0",
            f"POINTS {n}",
            "DATA ascii",
        ]
    elif format == "ply-ascii":
        header = [
            "ply",
            "format ascii 1.0",
            f"element vertex {n}",
            "property double x",
            "property double y",
            "property double z",
            "end_header",
        ]
    else:
        raise ValueError(f"unknown point cloud format {format!r}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(header + body) + "\n")


def _parse_floats(tokens, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise FormatError(f"cannot parse numbers from {' '.join(tokens)!r}", line=lineno) from None


def _read_xyz(lines):
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = [t for t in line.replace(",", " ").split()]
        if len(tokens) < 3:
            raise FormatError(f"expected x,y,z but got {raw!r}", line=lineno)
        rows.append((lineno, _parse_floats(tokens[:3], lineno)))
    return rows


def _read_pcd(lines):
    fields, counts = None, None
    points = None
    data_line = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        key = key.upper()
        if key == "FIELDS":
            fields = rest.split()
        elif key == "COUNT":
            counts = [int(c) for c in rest.split()]
        elif key == "POINTS":
            points = int(rest)
        elif key == "DATA":
            if rest.strip().lower() != "ascii":
                raise FormatError(f"only ascii PCD is supported, got DATA {rest.strip()}", line=lineno)
            data_line = lineno
            break
    if data_line is None or fields is None:
        raise FormatError("PCD header is missing FIELDS or DATA")
    counts = counts or [1] * len(fields)
    if len(counts) != len(fields):
        raise FormatError("PCD COUNT does not match FIELDS")
    offsets = np.concatenate([[0], np.cumsum(counts)])
    try:
        cols = [int(offsets[fields.index(axis)]) for axis in "xyz"]
    except ValueError:
        raise FormatError("PCD file lacks one of the x/y/z fields") from None
    width = int(offsets[-1])

    rows = []
    for lineno in range(data_line + 1, len(lines) + 1):
        tokens = lines[lineno - 1].split()
        if not tokens:
            continue
        if len(tokens) != width:
            raise FormatError(f"expected {width} values, got {len(tokens)}", line=lineno)
        rows.append((lineno, _parse_floats([tokens[c] for c in cols], lineno)))
    if points is not None and points != len(rows):
        raise FormatError(f"PCD header declares {points} points but {len(rows)} were read")
    return rows


def _read_ply(lines):
    if not lines or lines[0].strip() != "ply":
        raise FormatError("missing 'ply' magic", line=1)
    elements = []  # [name, count, [props]]
    end = None
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise FormatError("only ascii PLY is supported", line=lineno)
        elif tokens[0] == "element":
            elements.append([tokens[1], int(tokens[2]), []])
        elif tokens[0] == "property":
            if not elements:
                raise FormatError("property before element", line=lineno)
            elements[-1][2].append(tokens[1:])
        elif tokens[0] == "end_header":
            end = lineno
            break
    if end is None:
        raise FormatError("PLY header has no end_header")

    rows = []
    cursor = end + 1
    for name, count, props in elements:
        if name != "vertex":
            # skip over other elements (faces etc.); they precede or follow vertices
            skipped = 0
            while skipped < count and cursor <= len(lines):
                if lines[cursor - 1].strip():
                    skipped += 1
                cursor += 1
            continue
        if any(p[0] == "list" for p in props):
            raise FormatError("list properties on vertices are not supported")
        names = [p[-1] for p in props]
        try:
            cols = [names.index(axis) for axis in "xyz"]
        except ValueError:
            raise FormatError("PLY vertex element lacks x/y/z") from None
        read = 0
        while read < count:
            if cursor > len(lines):
                raise FormatError(f"expected {count} vertices, file ended after {read}")
            tokens = lines[cursor - 1].split()
            if tokens:
                if len(tokens) != len(names):
                    raise FormatError(f"expected {len(names)} values, got {len(tokens)}", line=cursor)
                rows.append((cursor, _parse_floats([tokens[c] for c in cols], cursor)))
                read += 1
            cursor += 1
    return rows


def as_transform(rigid) -> np.ndarray:
    """Coerce ``rigid`` to a validated 4x4 homogeneous matrix.

    Accepts a 4x4 array or an ``(R, t)`` pair.
    """
    if isinstance(rigid, tuple) and len(rigid) == 2:
        rot, trans = rigid
        mat = np.eye(4)
        mat[:3, :3] = np.asarray(rot, dtype=float)
        mat[:3, 3] = np.asarray(trans, dtype=float).reshape(3)
    else:
        mat = np.asarray(rigid, dtype=float)
    if mat.shape != (4, 4) or not np.all(np.isfinite(mat)):
        raise InvalidTransform("expected a finite 4x4 homogeneous transform")
    rot = mat[:3, :3]
    if not np.allclose(rot.T @ rot, np.eye(3), rtol=0, atol=1e-9):
        raise InvalidTransform("rotation part is not orthonormal")
    if abs(np.linalg.det(rot) - 1.0) > 1e-9:
        raise InvalidTransform("rotation part has det != +1")
    if not np.array_equal(mat[3], [0, 0, 0, 1]):
        raise InvalidTransform("last row must be [0, 0, 0, 1]")
    return mat


def transform(cloud: PointCloud, rigid) -> PointCloud:
    mat = as_transform(rigid)
    return PointCloud(cloud.points @ mat[:3, :3].T + mat[:3, 3])


def invert_transform(rigid) -> np.ndarray:
    mat = as_transform(rigid)
    inv = np.eye(4)
    inv[:3, :3] = mat[:3, :3].T
    inv[:3, 3] = -mat[:3, :3].T @ mat[:3, 3]
    return inv
