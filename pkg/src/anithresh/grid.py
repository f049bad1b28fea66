"""Uniform periodic grids, spectral convolution and sub-grid interface tools.

Arrays are indexed ``values[iy, ix]`` (rows run along y).  Grid points sit at
``x_min + i*dx``; the right/top boundary is identified with the left/bottom
one, so ``x_max`` itself is not a grid point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import DegenerateLevel, GridMismatch


@dataclass(frozen=True)
class Grid:
    n: int = 512
    x_min: float = -5.0
    x_max: float = 5.0
    y_min: float = -5.0
    y_max: float = 5.0

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not math.isclose(self.x_max - self.x_min, self.y_max - self.y_min):
            raise ValueError("cells must be square: use equal side lengths")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @cached_property
    def y(self) -> np.ndarray:
        return self.y_min + self.dx * np.arange(self.n)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)

    @cached_property
    def centered(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of grid offsets in FFT order (wrapped about 0)."""
        d = np.fft.fftfreq(self.n, 1.0 / self.n) * self.dx
        return np.meshgrid(d, d)

    @cached_property
    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical frequencies (xi_x, xi_y) of the full FFT lattice."""
        k = np.fft.fftfreq(self.n, self.dx)
        return np.meshgrid(k, k)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def mirror_x(self, a: np.ndarray) -> np.ndarray:
        """Reflect an array under x -> -x (requires a symmetric domain)."""
        return np.roll(a[:, ::-1], 1, axis=1)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
        }


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridMismatch(f"values have shape {v.shape}, grid is {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray


def symmetrize_even(m: np.ndarray) -> np.ndarray:
    """Enforce M(xi) = M(-xi) on the FFT lattice, Nyquist lines included."""
    flipped = np.roll(m[::-1, ::-1], 1, axis=(0, 1))
    return 0.5 * (m + flipped)


def forward_transform(f: ScalarField) -> SpectralField:
    """Samples of the continuous transform, ``fft2(values) * dx^2``."""
    return SpectralField(f.grid, sfft.fft2(f.values) * f.grid.cell_area)


def inverse_transform(F: SpectralField) -> ScalarField:
    vals = sfft.ifft2(F.coefficients / F.grid.cell_area).real
    return ScalarField(F.grid, vals)


def half_spectrum(m: np.ndarray) -> np.ndarray:
    """Restrict a full even multiplier to the ``rfft2`` half plane."""
    return np.ascontiguousarray(m[:, : m.shape[1] // 2 + 1])


def convolve_values(values: np.ndarray, multiplier_half: np.ndarray) -> np.ndarray:
    """Periodic convolution with a kernel given by its (half) spectrum."""
    return sfft.irfft2(sfft.rfft2(values) * multiplier_half, s=values.shape)


def convolve(f: ScalarField, kernel, dt: float) -> ScalarField:
    """K_dt * f computed spectrally with the kernel rescaled to ``dt``."""
    if kernel.grid != f.grid:
        from .errors import KernelGridMismatch

        raise KernelGridMismatch("kernel was sampled on a different grid")
    return ScalarField(f.grid, convolve_values(f.values, kernel.multiplier(dt)))


# ---------------------------------------------------------------------------
# sub-grid interfaces


@dataclass(frozen=True, eq=False)
class SubgridInterface:
    vertex_weights: ScalarField
    cell_fractions: np.ndarray
    crossings: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.vertex_weights.grid

    def area(self) -> float:
        return self.vertex_weights.integral()


def _crossing(va, vb, level):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (level - va) / (vb - va)
    return np.clip(np.nan_to_num(t, nan=0.5), 0.0, 1.0)


def cell_fractions(values: np.ndarray, level: float) -> np.ndarray:
    """Area fraction of each periodic cell where the field is >= level.

    Cell ``(j, i)`` has corners ``(j, i)``, ``(j, i+1)``, ``(j+1, i+1)`` and
    ``(j+1, i)``.  Edge crossings are located by linear interpolation and the
    inside polygon is clipped from the unit cell.  Saddle cells are resolved
    by the average of the four corner values.
    """
    c = [
        values,
        np.roll(values, -1, axis=1),
        np.roll(values, (-1, -1), axis=(0, 1)),
        np.roll(values, -1, axis=0),
    ]
    ins = [v >= level for v in c]
    corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    t = [_crossing(c[k], c[(k + 1) % 4], level) for k in range(4)]
    zero = np.zeros_like(values)
    one = np.ones_like(values)
    # edge k runs from corner k to corner k+1 (counter-clockwise)
    qx = [t[0], one, 1.0 - t[2], zero]
    qy = [zero, t[1], one, 1.0 - t[3]]

    verts = []
    for k in range(4):
        px, py = corners[k]
        verts.append((ins[k], px * one, py * one))
        verts.append((ins[k] != ins[(k + 1) % 4], qx[k], qy[k]))

    # forward-fill excluded vertices with the last included one; repeated
    # points add nothing to the shoelace sum
    lx = np.zeros_like(values)
    ly = np.zeros_like(values)
    for m, vx, vy in verts + verts:
        lx = np.where(m, vx, lx)
        ly = np.where(m, vy, ly)
    xs, ys = [], []
    for m, vx, vy in verts:
        lx = np.where(m, vx, lx)
        ly = np.where(m, vy, ly)
        xs.append(lx)
        ys.append(ly)
    area = zero.copy()
    for k in range(8):
        k1 = (k + 1) % 8
        area += xs[k] * ys[k1] - xs[k1] * ys[k]
    area *= 0.5

    # disconnected saddle: two corner triangles instead of a hexagon
    center = 0.25 * (c[0] + c[1] + c[2] + c[3])
    diag_a = ins[0] & ins[2] & ~ins[1] & ~ins[3]
    diag_b = ins[1] & ins[3] & ~ins[0] & ~ins[2]
    split = (diag_a | diag_b) & (center < level)
    if np.any(split):
        tri_a = 0.5 * t[0] * (1 - t[3]) + 0.5 * (1 - t[1]) * t[2]
        tri_b = 0.5 * (1 - t[0]) * t[1] + 0.5 * (1 - t[2]) * t[3]
        area = np.where(split & diag_a, tri_a, area)
        area = np.where(split & diag_b, tri_b, area)
    return np.clip(area, 0.0, 1.0)


def _crossing_points(grid: Grid, values: np.ndarray, level: float) -> np.ndarray:
    x, y = grid.x, grid.y
    dx = grid.dx
    ins = values >= level
    pts = []
    right = np.roll(values, -1, axis=1)
    jj, ii = np.nonzero(ins != np.roll(ins, -1, axis=1))
    t = _crossing(values[jj, ii], right[jj, ii], level)
    pts.append(np.column_stack([x[ii] + t * dx, y[jj]]))
    up = np.roll(values, -1, axis=0)
    jj, ii = np.nonzero(ins != np.roll(ins, -1, axis=0))
    t = _crossing(values[jj, ii], up[jj, ii], level)
    pts.append(np.column_stack([x[ii], y[jj] + t * dx]))
    return np.concatenate(pts)


def vertex_weights_from_cells(frac: np.ndarray) -> np.ndarray:
    """Average of the four cells sharing each grid point."""
    w = 0.25 * (
        frac
        + np.roll(frac, 1, axis=1)
        + np.roll(frac, 1, axis=0)
        + np.roll(frac, (1, 1), axis=(0, 1))
    )
    return np.clip(w, 0.0, 1.0)


def subgrid_extract(
    f: ScalarField, level: float, *, with_crossings: bool = True, strict: bool = False
) -> SubgridInterface:
    """Sub-grid accurate indicator of ``{f >= level}``.

    If ``level`` lies outside the range of ``f`` the result is trivially empty
    or full; pass ``strict=True`` to raise :class:`DegenerateLevel` instead.
    """
    v = f.values
    lo, hi = float(v.min()), float(v.max())
    if level > hi or level <= lo:
        if strict:
            raise DegenerateLevel(f"level {level} outside [{lo}, {hi}]")
        full = level <= lo
        frac = np.full(v.shape, 1.0 if full else 0.0)
        return SubgridInterface(ScalarField(f.grid, frac.copy()), frac, np.empty((0, 2)))
    frac = cell_fractions(v, level)
    w = vertex_weights_from_cells(frac)
    pts = _crossing_points(f.grid, v, level) if with_crossings else np.empty((0, 2))
    return SubgridInterface(ScalarField(f.grid, w), frac, pts)


def _weights(a):
    if isinstance(a, SubgridInterface):
        return a.grid, a.vertex_weights.values
    if isinstance(a, ScalarField):
        return a.grid, a.values
    return None, np.asarray(a, dtype=float)


def l1_difference(a, b, grid: Grid | None = None) -> float:
    """Area of the L1 difference ``dx^2 * sum |a - b|`` of two indicators."""
    ga, wa = _weights(a)
    gb, wb = _weights(b)
    if ga is not None and gb is not None and ga != gb:
        raise GridMismatch("indicators live on different grids")
    g = ga or gb or grid
    if g is None:
        raise ValueError("pass grid= when comparing raw arrays")
    if wa.shape != wb.shape:
        raise GridMismatch(f"shapes differ: {wa.shape} vs {wb.shape}")
    return float(np.abs(wa - wb).sum() * g.cell_area)


@dataclass(frozen=True, eq=False)
class Components:
    labels: np.ndarray
    count: int
    areas: np.ndarray
    cell_counts: np.ndarray


def connected_components(indicator, threshold: float = 0.5, grid: Grid | None = None) -> Components:
    """4-connected components of ``{indicator >= threshold}``."""
    g, w = _weights(indicator)
    g = g or grid
    labels, count = ndimage.label(w >= threshold)
    counts = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    cell = g.cell_area if g is not None else 1.0
    return Components(labels, int(count), counts * cell, counts)


# ---------------------------------------------------------------------------
# rasterising shapes


def level_from_polygon(grid: Grid, poly, band_cells: float = 4.0) -> np.ndarray:
    """Signed distance to a closed polygon (positive inside).

    Exact near the boundary (within ``band_cells`` cells); clipped to
    +-band farther away.  Suitable as input to :func:`subgrid_extract` at
    level 0.
    """
    from matplotlib.path import Path as MplPath

    p = np.asarray(poly, dtype=float)
    if np.allclose(p[0], p[-1]):
        p = p[:-1]
    X, Y = grid.mesh
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = MplPath(np.vstack([p, p[:1]]), closed=True).contains_points(pts, radius=0.0)
    band = band_cells * grid.dx

    a = p
    b = np.roll(p, -1, axis=0)
    seg_len = np.hypot(*(b - a).T)
    # dense boundary samples to find candidate segments quickly
    per = np.maximum(1, np.ceil(seg_len / (0.25 * grid.dx)).astype(int))
    owner = np.repeat(np.arange(len(a)), per)
    frac = np.concatenate([np.arange(k) / k for k in per])
    samples = a[owner] + frac[:, None] * (b - a)[owner]
    tree = cKDTree(samples)
    dist, idx = tree.query(pts, distance_upper_bound=band + grid.dx)
    near = np.isfinite(dist)
    d = np.full(len(pts), band)
    if np.any(near):
        q = pts[near]
        seg0 = owner[idx[near]]
        best = np.full(len(q), np.inf)
        for off in (-1, 0, 1):
            s = (seg0 + off) % len(a)
            ab = b[s] - a[s]
            tt = np.einsum("ij,ij->i", q - a[s], ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
            proj = a[s] + np.clip(tt, 0, 1)[:, None] * ab
            best = np.minimum(best, np.hypot(*(q - proj).T))
        d[near] = np.minimum(best, band)
    d = np.where(inside, d, -d)
    return d.reshape(grid.shape)


def polygon_indicator(grid: Grid, poly) -> tuple[np.ndarray, SubgridInterface]:
    """Binary grid indicator and sub-grid weights of a polygon."""
    lev = level_from_polygon(grid, poly)
    return (lev >= 0).astype(float), subgrid_extract(ScalarField(grid, lev), 0.0, with_crossings=False)


def interface_polylines(f: ScalarField, level: float) -> list[np.ndarray]:
    """Level-set curves of ``f`` as polylines (marching squares)."""
    from skimage import measure

    contours = measure.find_contours(f.values, level)
    g = f.grid
    return [np.column_stack([g.x_min + c[:, 1] * g.dx, g.y_min + c[:, 0] * g.dx]) for c in contours]


# ---------------------------------------------------------------------------
# raster output


def write_pgm(path, f, vmin: float | None = None, vmax: float | None = None) -> None:
    """ASCII 16-bit PGM (P2); the first row written is y = y_max."""
    v = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    lo = float(v.min()) if vmin is None else vmin
    hi = float(v.max()) if vmax is None else vmax
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    q = np.clip(np.rint((v - lo) * scale), 0, 65535).astype(np.int64)[::-1]
    with open(path, "w") as fh:
        fh.write(f"P2\n{q.shape[1]} {q.shape[0]}\n65535\n")
        for row in q:
            fh.write(" ".join(map(str, row)))
            fh.write("\n")


def read_pgm(path) -> np.ndarray:
    """Read a P2 file written by :func:`write_pgm` back to row-y order."""
    tokens = [t for line in Path(path).read_text().splitlines() if not line.startswith("#") for t in line.split()]
    if tokens[0] != "P2":
        raise ValueError("not an ASCII PGM file")
    w, h, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array(tokens[4:], dtype=np.int64).reshape(h, w)
    return data[::-1]


def write_field_csv(path, f: ScalarField) -> None:
    X, Y = f.grid.mesh
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for row in zip(X.ravel(), Y.ravel(), f.values.ravel()):
            w.writerow([f"{row[0]:.10g}", f"{row[1]:.10g}", f"{row[2]:.10g}"])


def write_points_csv(path, pts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in np.asarray(pts).reshape(-1, 2):
            w.writerow([f"{x:.10g}", f"{y:.10g}"])
