"""PPM and SVG pictures of a hybrid map with optional path overlays.

Pixel row 0 is the top of the image, i.e. the map's largest y. Each cell
becomes a ``scale x scale`` block.
"""
from __future__ import annotations

import os

import numpy as np

from .hybrid_map import OBSTACLE, TERRAIN, HybridMap

OBSTACLE_RGB = (255, 0, 0)
UNKNOWN_RGB = (128, 128, 128)
# warm (low traversability) to cool (high)
_STOPS = np.array([
    [0.0, 255, 140, 0],
    [1 / 3, 255, 230, 0],
    [2 / 3, 40, 180, 60],
    [1.0, 30, 80, 220],
])
PATH_COLORS = ("#000000", "#d000d0", "#00a0a0", "#ffffff", "#804000")


def tau_color(tau) -> np.ndarray:
    """Map traversability in [0, 1] to uint8 RGB, warm to cool."""
    t = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)
    out = np.empty(t.shape + (3,))
    for c in range(3):
        out[..., c] = np.interp(t, _STOPS[:, 0], _STOPS[:, c + 1])
    return np.rint(out).astype(np.uint8)


def cell_colors(hmap: HybridMap) -> np.ndarray:
    """``(rows, cols, 3)`` colours in map row order (row 0 = smallest y)."""
    rgb = np.empty(hmap.shape + (3,), np.uint8)
    rgb[:] = UNKNOWN_RGB
    terrain = hmap.kind == TERRAIN
    rgb[terrain] = tau_color(hmap.tau[terrain].astype(float))
    rgb[hmap.kind == OBSTACLE] = OBSTACLE_RGB
    return rgb


def world_to_pixel(hmap: HybridMap, x, y, scale=1):
    """Continuous pixel coordinates of a world point (origin at the top-left corner)."""
    px = (x - hmap.origin[0]) / hmap.resolution * scale
    py = (hmap.origin[1] + hmap.height * hmap.resolution - y) / hmap.resolution * scale
    return px, py


def raster(hmap: HybridMap, scale=1) -> np.ndarray:
    img = cell_colors(hmap)[::-1]
    if scale > 1:
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    return np.ascontiguousarray(img)


def _draw_line(img, p0, p1, rgb):
    h, w, _ = img.shape
    n = int(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1]))) + 1
    xs = np.rint(np.linspace(p0[0], p1[0], n + 1)).astype(int)
    ys = np.rint(np.linspace(p0[1], p1[1], n + 1)).astype(int)
    ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    img[ys[ok], xs[ok]] = rgb


def write_ppm(hmap: HybridMap, path, paths=(), scale=4) -> None:
    """Binary PPM (P6). Paths are drawn as one-pixel polylines."""
    img = raster(hmap, scale)
    for k, result in enumerate(paths):
        colour = PATH_COLORS[k % len(PATH_COLORS)]
        rgb = tuple(int(colour[i:i + 2], 16) for i in (1, 3, 5))
        pts = [world_to_pixel(hmap, w.x, w.y, scale) for w in result.waypoints]
        for a, b in zip(pts, pts[1:]):
            _draw_line(img, a, b, rgb)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(maxsplit=4)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], np.uint8, count=w * h * 3).reshape(h, w, 3)


def write_svg(hmap: HybridMap, path, paths=(), labels=None, scale=4) -> None:
    """SVG with one rect per cell, path polylines, and a legend."""
    rgb = cell_colors(hmap)
    rows, cols = hmap.shape
    w, h = cols * scale, rows * scale
    legend_h = 16 * (len(paths) + 1) if paths else 0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h + legend_h}" '
           f'viewBox="0 0 {w} {h + legend_h}">']
    for i in range(rows):
        y = (rows - 1 - i) * scale
        for j in range(cols):
            r, g, b = rgb[i, j]
            out.append(f'<rect x="{j * scale}" y="{y}" width="{scale}" height="{scale}" '
                       f'fill="#{r:02x}{g:02x}{b:02x}"/>')
    labels = list(labels) if labels is not None else [getattr(p, "mode", f"path {k}") for k, p in enumerate(paths)]
    for k, result in enumerate(paths):
        colour = PATH_COLORS[k % len(PATH_COLORS)]
        pts = " ".join("{:.3f},{:.3f}".format(*world_to_pixel(hmap, wp.x, wp.y, scale))
                       for wp in result.waypoints)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
    for k, label in enumerate(labels[:len(paths)]):
        colour = PATH_COLORS[k % len(PATH_COLORS)]
        y = h + 12 + 16 * k
        out.append(f'<line x1="4" y1="{y - 4}" x2="24" y2="{y - 4}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="28" y="{y}" font-size="11" font-family="sans-serif">{label}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def render(hmap: HybridMap, path, paths=(), labels=None, scale=4) -> None:
    """Write ``path`` as PPM or SVG, chosen by extension."""
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".ppm":
        write_ppm(hmap, path, paths, scale)
    elif ext == ".svg":
        write_svg(hmap, path, paths, labels, scale)
    else:
        raise ValueError(f"unsupported image format {ext!r} (use .ppm or .svg)")
