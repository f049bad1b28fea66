"""Initial particle shapes for experiment configs."""

from __future__ import annotations

from importlib import resources

import numpy as np

from ..grid import Grid, polygon_indicator

_TOL = 1e-9


def load_s_shape(path=None) -> np.ndarray:
    """Vertices of the shipped (approximate) S-shaped polygon."""
    if path is None:
        text = resources.files("anithresh.data").joinpath("s_shape.csv").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return np.array([[float(v) for v in ln.split(",")] for ln in rows[1:]])


def _ellipse(center, axes, n=720) -> np.ndarray:
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.c_[center[0] + axes[0] * np.cos(t), center[1] + axes[1] * np.sin(t)]


def triangle_pair(gap: float = 0.4, width: float = 1.0, height: float = 1.0) -> list[np.ndarray]:
    """Two right triangles on the substrate whose vertical legs face each other."""
    h = 0.5 * gap
    left = np.array([[-h - width, 0.0], [-h, 0.0], [-h, height]])
    right = np.array([[h, 0.0], [h + width, 0.0], [h, height]])
    return [left, right]


def shape_polygons(shape: dict) -> list[np.ndarray]:
    """Counter-clockwise polygons describing a shape spec."""
    t = shape["type"]
    if t == "ellipse":
        return [_ellipse(shape.get("center", [0.0, 0.0]), shape.get("axes", [1.0, 2.0]))]
    if t == "circle":
        r = float(shape.get("radius", 1.0))
        return [_ellipse(shape.get("center", [0.0, 0.0]), [r, r])]
    if t == "rectangle":
        x0, x1 = map(float, shape["x"])
        y0, y1 = map(float, shape["y"])
        if not (x0 < x1 and y0 < y1):
            raise ValueError("rectangle needs x0 < x1 and y0 < y1")
        return [np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])]
    if t == "triangle-pair":
        return triangle_pair(float(shape.get("gap", 0.4)), float(shape.get("width", 1.0)), float(shape.get("height", 1.0)))
    if t == "polygon":
        v = shape["vertices"]
        if v and isinstance(v[0][0], (list, tuple)):
            return [np.asarray(p, dtype=float) for p in v]
        return [np.asarray(v, dtype=float)]
    if t == "s-shape":
        p = load_s_shape(shape.get("file"))
        c = shape.get("center", [0.0, 0.0])
        return [p * float(shape.get("scale", 1.0)) + np.asarray(c, dtype=float)]
    raise ValueError(f"unknown shape type {t!r}")


def _convex_inclusive(grid: Grid, poly: np.ndarray) -> np.ndarray:
    X, Y = grid.mesh
    inside = np.ones(X.shape, dtype=bool)
    m = len(poly)
    area2 = np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    sgn = 1.0 if area2 > 0 else -1.0
    for i in range(m):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % m]
        cross = (x1 - x0) * (Y - y0) - (y1 - y0) * (X - x0)
        inside &= sgn * cross >= -_TOL * np.hypot(x1 - x0, y1 - y0)
    return inside


def shape_indicator(grid: Grid, shape: dict) -> np.ndarray:
    """Binary indicator of a shape; boundary points count as inside.

    Ellipses and circles use their implicit equation, rectangles and
    triangles exact half-plane tests, other polygons the grid rasterizer.
    """
    X, Y = grid.mesh
    t = shape["type"]
    if t in ("ellipse", "circle"):
        cx, cy = shape.get("center", [0.0, 0.0])
        if t == "circle":
            ax = ay = float(shape.get("radius", 1.0))
        else:
            ax, ay = map(float, shape.get("axes", [1.0, 2.0]))
        return (((X - cx) / ax) ** 2 + ((Y - cy) / ay) ** 2 <= 1.0 + _TOL).astype(float)
    out = np.zeros(grid.shape, dtype=bool)
    for p in shape_polygons(shape):
        if t in ("rectangle", "triangle-pair"):
            out |= _convex_inclusive(grid, p)
        else:
            out |= polygon_indicator(grid, p)[0] > 0.5
    return out.astype(float)
