"""Deterministic synthetic terrain clouds with analytic ground truth.

A scenario is flat ground over ``[0, X) x [0, Y)`` plus a list of features.
Ramps and bumps are smooth height fields; pits, boulders and walls have
vertical sides that are sampled as well; canopy is an overhanging point layer
that never touches the ground surface.

Every feature draws from its own Philox stream keyed by ``(seed, stream)``,
so adding or removing canopy leaves the ground points bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import kvconfig
from .errors import FormatError
from .pointcloud import PointCloud


@dataclass(frozen=True)
class Ramp:
    """Long slope: rises at ``alpha`` along ``azimuth`` between arc-length
    positions ``start`` and ``end``, flat (plateau) beyond."""

    alpha: float
    start: float
    end: float
    azimuth: float = 0.0

    def _s(self, x, y):
        return x * math.cos(self.azimuth) + y * math.sin(self.azimuth)

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError("ramp end must exceed start")

    def height_at(self, x, y):
        s = np.clip(self._s(x, y) - self.start, 0.0, self.end - self.start)
        return math.tan(self.alpha) * s

    def gradient(self, x, y):
        s = self._s(x, y)
        inside = (s > self.start) & (s < self.end)
        g = np.where(inside, math.tan(self.alpha), 0.0)
        return g * math.cos(self.azimuth), g * math.sin(self.azimuth)

    def edge_distance(self, x, y):
        s = self._s(x, y)
        return np.minimum(np.abs(s - self.start), np.abs(s - self.end))


@dataclass(frozen=True)
class Bump:
    """Smooth raised-cosine mound."""

    height: float
    center: tuple
    radius: float

    def _r(self, x, y):
        return np.hypot(x - self.center[0], y - self.center[1])

    def height_at(self, x, y):
        r = self._r(x, y)
        return np.where(r < self.radius,
                        0.5 * self.height * (1 + np.cos(np.pi * np.minimum(r, self.radius) / self.radius)),
                        0.0)

    def gradient(self, x, y):
        r = self._r(x, y)
        inside = (r < self.radius) & (r > 0)
        safe = np.where(inside, r, 1.0)
        dz_dr = -0.5 * self.height * np.pi / self.radius * np.sin(np.pi * safe / self.radius)
        dz_dr = np.where(inside, dz_dr, 0.0)
        return dz_dr * (x - self.center[0]) / safe, dz_dr * (y - self.center[1]) / safe

    def edge_distance(self, x, y):
        # the whole mound is curved; treat its footprint as boundary
        return np.maximum(self._r(x, y) - self.radius, 0.0)


class _Cylinder:
    """Shared geometry of vertical-sided circular features."""

    def inside(self, x, y):
        return np.hypot(x - self.center[0], y - self.center[1]) < self.radius

    def edge_distance(self, x, y):
        return np.abs(np.hypot(x - self.center[0], y - self.center[1]) - self.radius)

    def side_points(self, rng, density):
        area = 2 * math.pi * self.radius * self.step
        n = int(round(area * density))
        ang = rng.uniform(0, 2 * math.pi, n)
        x = self.center[0] + self.radius * np.cos(ang)
        y = self.center[1] + self.radius * np.sin(ang)
        return x, y, rng.uniform(0, 1, n)


@dataclass(frozen=True)
class Pit(_Cylinder):
    """Flat-floored pit with vertical walls."""

    depth: float
    center: tuple
    radius: float

    @property
    def step(self):
        return self.depth


@dataclass(frozen=True)
class Boulder(_Cylinder):
    """Flat-topped block with vertical sides."""

    height: float
    center: tuple
    radius: float

    @property
    def step(self):
        return self.height


@dataclass(frozen=True)
class Wall:
    """Thin box along the segment ``start`` -> ``end``."""

    start: tuple
    end: tuple
    height: float
    thickness: float = 0.3

    def _local(self, x, y):
        (x0, y0), (x1, y1) = self.start, self.end
        length = math.hypot(x1 - x0, y1 - y0)
        ux, uy = (x1 - x0) / length, (y1 - y0) / length
        u = (x - x0) * ux + (y - y0) * uy
        v = -(x - x0) * uy + (y - y0) * ux
        return u, v, length

    def inside(self, x, y):
        u, v, length = self._local(x, y)
        return (u >= 0) & (u <= length) & (np.abs(v) <= self.thickness / 2)

    def edge_distance(self, x, y):
        u, v, length = self._local(x, y)
        half = self.thickness / 2
        du = np.maximum(np.maximum(-u, u - length), 0.0)
        dv = np.maximum(np.abs(v) - half, 0.0)
        outside = np.hypot(du, dv)
        inside_d = np.minimum(np.minimum(u, length - u), half - np.abs(v))
        return np.where(self.inside(x, y), inside_d, outside)

    @property
    def step(self):
        return self.height

    def side_points(self, rng, density):
        (x0, y0), (x1, y1) = self.start, self.end
        length = math.hypot(x1 - x0, y1 - y0)
        ux, uy = (x1 - x0) / length, (y1 - y0) / length
        half = self.thickness / 2
        perimeter = 2 * (length + self.thickness)
        n = int(round(perimeter * self.height * density))
        t = rng.uniform(0, perimeter, n)
        u = np.empty(n)
        v = np.empty(n)
        a = t < length
        u[a], v[a] = t[a], -half
        b = (~a) & (t < length + self.thickness)
        u[b], v[b] = length, t[b] - length - half
        c = (~a) & (~b) & (t < 2 * length + self.thickness)
        u[c], v[c] = length - (t[c] - length - self.thickness), half
        d = ~(a | b | c)
        u[d], v[d] = 0.0, half - (t[d] - 2 * length - self.thickness)
        x = x0 + u * ux - v * uy
        y = y0 + u * uy + v * ux
        return x, y, rng.uniform(0, 1, n)


@dataclass(frozen=True)
class Canopy:
    """Overhanging layer ``height`` above local ground over ``region``
    ``(xmin, ymin, xmax, ymax)``."""

    height: float
    region: tuple
    thickness: float = 1.0


FEATURE_TYPES = {"ramp": Ramp, "bump": Bump, "pit": Pit, "boulder": Boulder,
                 "wall": Wall, "canopy": Canopy}


@dataclass(frozen=True)
class ScenarioSpec:
    extent: tuple = (20.0, 20.0)
    density: float = 100.0
    seed: int = 0
    noise_sigma: float = 0.0
    features: tuple = field(default_factory=tuple)
    name: str = "scenario"

    def __post_init__(self):
        if not self.density > 0:
            raise ValueError("density must be positive")
        if not (self.extent[0] > 0 and self.extent[1] > 0):
            raise ValueError("extent must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        object.__setattr__(self, "features", tuple(self.features))

    def without(self, kind) -> "ScenarioSpec":
        """Copy with all features of type ``kind`` removed."""
        return ScenarioSpec(self.extent, self.density, self.seed, self.noise_sigma,
                            tuple(f for f in self.features if not isinstance(f, kind)),
                            self.name)


# -- analytic surface --------------------------------------------------------

class GroundTruth:
    """Analytic elevation, inclination and classification of a scenario."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec

    def _base(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        for f in self.spec.features:
            if isinstance(f, (Ramp, Bump)):
                z = z + f.height_at(x, y)
        return z

    def elevation(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        z = self._base(x, y)
        for f in self.spec.features:
            if isinstance(f, Pit):
                z = np.where(f.inside(x, y), z - f.depth, z)
            elif isinstance(f, Boulder):
                z = np.where(f.inside(x, y), z + f.height, z)
            elif isinstance(f, Wall):
                z = np.where(f.inside(x, y), z + f.height, z)
        return z

    def inclination(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        gx = np.zeros(np.broadcast(x, y).shape)
        gy = np.zeros_like(gx)
        for f in self.spec.features:
            if isinstance(f, (Ramp, Bump)):
                dx, dy = f.gradient(x, y)
                gx, gy = gx + dx, gy + dy
        return np.arctan(np.hypot(gx, gy))

    def _steps(self, max_step):
        return [f for f in self.spec.features
                if isinstance(f, (Pit, Boulder, Wall)) and f.step > max_step]

    def classify(self, origin, resolution, shape, max_slope, max_step, samples=7):
        """Boolean obstacle raster: cells crossed by a vertical step taller
        than ``max_step`` or whose center inclination exceeds ``max_slope``."""
        rows, cols = shape
        ii, jj = np.indices(shape)
        cx = origin[0] + (jj + 0.5) * resolution
        cy = origin[1] + (ii + 0.5) * resolution
        obstacle = self.inclination(cx, cy) > max_slope
        offs = (np.arange(samples) + 0.5) / samples - 0.5
        for f in self._steps(max_step):
            inside_any = np.zeros(shape, bool)
            outside_any = np.zeros(shape, bool)
            for a in offs:
                for b in offs:
                    ins = f.inside(cx + a * resolution, cy + b * resolution)
                    inside_any |= ins
                    outside_any |= ~ins
            obstacle |= inside_any & outside_any
        return obstacle

    def boundary(self, origin, resolution, shape, margin):
        """Cells whose center is within ``margin`` of a feature edge or of the
        scenario border."""
        ii, jj = np.indices(shape)
        cx = origin[0] + (jj + 0.5) * resolution
        cy = origin[1] + (ii + 0.5) * resolution
        X, Y = self.spec.extent
        near = (cx < margin) | (cy < margin) | (cx > X - margin) | (cy > Y - margin)
        for f in self.spec.features:
            if isinstance(f, Canopy):
                continue
            near |= f.edge_distance(cx, cy) <= margin
        return near


# -- sampling ----------------------------------------------------------------

def _rng(seed, stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def generate(spec: ScenarioSpec):
    """Sample the scenario; returns ``(PointCloud, GroundTruth)``."""
    truth = GroundTruth(spec)
    X, Y = spec.extent
    step = 1.0 / math.sqrt(spec.density)
    nx, ny = int(math.ceil(X / step)), int(math.ceil(Y / step))
    rng = _rng(spec.seed, 0)
    gx, gy = np.meshgrid((np.arange(nx) + 0.0) * step, (np.arange(ny) + 0.0) * step)
    x = (gx + rng.uniform(0, step, gx.shape)).ravel()
    y = (gy + rng.uniform(0, step, gy.shape)).ravel()
    keep = (x < X) & (y < Y)
    x, y = x[keep], y[keep]
    z = truth.elevation(x, y)
    if spec.noise_sigma > 0:
        z = z + _rng(spec.seed, 1).normal(0.0, spec.noise_sigma, len(z))
    chunks = [np.column_stack([x, y, z])]

    for k, f in enumerate(spec.features):
        frng = _rng(spec.seed, 100 + k)
        if isinstance(f, (Pit, Boulder, Wall)):
            sx, sy, frac = f.side_points(frng, spec.density)
            if len(sx) == 0:
                continue
            base = truth._base(sx, sy)
            if isinstance(f, Pit):
                sz = base - frac * f.depth
            else:
                sz = base + frac * f.height
            if spec.noise_sigma > 0:
                sz = sz + frng.normal(0.0, spec.noise_sigma, len(sz))
            ok = (sx >= 0) & (sx < X) & (sy >= 0) & (sy < Y)
            chunks.append(np.column_stack([sx, sy, sz])[ok])
        elif isinstance(f, Canopy):
            x0, y0, x1, y1 = f.region
            n = int(round((x1 - x0) * (y1 - y0) * spec.density))
            cx = frng.uniform(x0, x1, n)
            cy = frng.uniform(y0, y1, n)
            cz = truth.elevation(cx, cy) + f.height + frng.uniform(0.0, f.thickness, n)
            chunks.append(np.column_stack([cx, cy, cz]))
    return PointCloud(np.concatenate(chunks)), truth


# -- text format ---------------------------------------------------------------

_TUPLE_FIELDS = {"center": 2, "start": None, "end": None, "region": 4}


def _feature_from_block(name, values):
    cls = FEATURE_TYPES.get(name)
    if cls is None:
        raise FormatError(f"unknown feature [{name}]")
    kwargs = {}
    names = {f.name for f in fields(cls)}
    for key, raw in values.items():
        if key not in names:
            raise FormatError(f"[{name}]: unknown key {key!r}")
        nums = kvconfig.floats(raw, key=key)
        if cls is Wall and key in ("start", "end"):
            if len(nums) != 2:
                raise FormatError(f"[{name}] {key}: expected 2 numbers")
            kwargs[key] = nums
        elif key in ("center", "region"):
            if len(nums) != _TUPLE_FIELDS[key]:
                raise FormatError(f"[{name}] {key}: expected {_TUPLE_FIELDS[key]} numbers")
            kwargs[key] = nums
        else:
            if len(nums) != 1:
                raise FormatError(f"[{name}] {key}: expected one number")
            kwargs[key] = nums[0]
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise FormatError(f"[{name}]: {exc}") from None


def parse_scenario(text: str, name: str = "scenario") -> ScenarioSpec:
    top, blocks = kvconfig.parse(text)
    known = {"extent", "density", "seed", "noise_sigma", "name"}
    unknown = set(top) - known
    if unknown:
        raise FormatError(f"unknown scenario keys: {sorted(unknown)}")
    kwargs = {"name": top.get("name", name)}
    if "extent" in top:
        kwargs["extent"] = kvconfig.floats(top["extent"], 2, "extent")
    if "density" in top:
        kwargs["density"] = kvconfig.floats(top["density"], 1, "density")[0]
    if "seed" in top:
        try:
            kwargs["seed"] = int(top["seed"])
        except ValueError:
            raise FormatError(f"seed: expected an integer, got {top['seed']!r}") from None
    if "noise_sigma" in top:
        kwargs["noise_sigma"] = kvconfig.floats(top["noise_sigma"], 1, "noise_sigma")[0]
    kwargs["features"] = tuple(_feature_from_block(n, v) for n, v in blocks)
    try:
        return ScenarioSpec(**kwargs)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def load_scenario(path) -> ScenarioSpec:
    from pathlib import Path

    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def dump_scenario(spec: ScenarioSpec) -> str:
    lines = [f"name = {spec.name}", f"extent = {kvconfig.fmt(tuple(spec.extent))}",
             f"density = {kvconfig.fmt(float(spec.density))}", f"seed = {spec.seed}",
             f"noise_sigma = {kvconfig.fmt(float(spec.noise_sigma))}"]
    for f in spec.features:
        kind = next(k for k, v in FEATURE_TYPES.items() if type(f) is v)
        lines.append("")
        lines.append(f"[{kind}]")
        for fld in fields(f):
            key = fld.name
            value = getattr(f, fld.name)
            lines.append(f"{key} = {kvconfig.fmt(tuple(map(float, value)) if isinstance(value, tuple) else float(value))}")
    return "\n".join(lines) + "\n"


def builtin_scenarios() -> dict:
    """Fixture scenarios shipped with the package, keyed by file stem."""
    from importlib import resources

    out = {}
    for entry in sorted((resources.files("thybrid") / "scenarios").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".scn"):
            out[entry.name[:-4]] = parse_scenario(entry.read_text(encoding="utf-8"),
                                                  name=entry.name[:-4])
    return out
