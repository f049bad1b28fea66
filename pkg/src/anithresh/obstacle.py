"""Particle on a flat substrate: three phases with an area constraint.

The substrate ``S`` occupies the rows with ``y < 0``; the particle lives in
``Omega_up`` (rows with ``y >= 0``).  Each step computes

    phi = dt^{-1/2} (K_dt * (1_up - 2u) + sum_i (gamma_SP,i - gamma_SV,i) G_dt * 1_{S_i})

and keeps the M points of ``Omega_up`` with the smallest ``phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import InsufficientDomain, MaxSteps, NoContact
from .grid import (
    Grid,
    ScalarField,
    SubgridInterface,
    connected_components,
    convolve_values,
    interface_polylines,
    polygon_indicator,
    subgrid_extract,
)
from .kernels import SampledKernel, build_gaussian


# ---------------------------------------------------------------------------
# substrate description


@dataclass(frozen=True)
class SubstratePattern:
    """Piecewise constant ``gamma_SP - gamma_SV`` along the substrate line.

    ``segments`` is a sequence of ``((x_lo, x_hi), value)``; the intervals
    must be sorted, contiguous and start at -inf and end at +inf.  Point x
    belongs to the segment with ``x_lo <= x < x_hi``.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple((tuple(map(float, iv)), float(v)) for iv, v in self.segments)
        if not segs:
            raise ValueError("pattern needs at least one segment")
        if segs[0][0][0] != -math.inf or segs[-1][0][1] != math.inf:
            raise ValueError("pattern intervals must cover the whole substrate line")
        for (a, _), (b, _) in zip(segs, segs[1:]):
            if a[1] != b[0]:
                raise ValueError("pattern intervals must be contiguous")
        for (lo, hi), _ in segs:
            if not lo < hi:
                raise ValueError("empty pattern interval")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def uniform(cls, value: float) -> "SubstratePattern":
        return cls((((-math.inf, math.inf), value),))

    @classmethod
    def strip(cls, lo: float, hi: float, inner: float, outer: float = 0.0) -> "SubstratePattern":
        """``inner`` on ``(lo, hi)``, ``outer`` elsewhere."""
        return cls((((-math.inf, lo), outer), ((lo, hi), inner), ((hi, math.inf), outer)))

    def value_at(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for (lo, hi), v in self.segments:
            out[(x >= lo) & (x < hi)] = v
        return out

    def to_dict(self) -> dict:
        return {"segments": [[[lo, hi], v] for (lo, hi), v in self.segments]}


@dataclass(frozen=True, eq=False)
class SubstrateTerm:
    """One vertical strip of the substrate with its two tensions."""

    mask: np.ndarray
    gamma_sp: float
    gamma_sv: float


def flat_masks(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(substrate, up) indicators: rows with y < 0 and y >= 0."""
    _, Y = grid.mesh
    sub = (Y < 0).astype(float)
    return sub, 1.0 - sub


def substrate_terms(
    grid: Grid,
    gamma_sp: float | None = None,
    gamma_sv: float | None = None,
    pattern: SubstratePattern | None = None,
) -> tuple[SubstrateTerm, ...]:
    """Strips of S; a pattern gives each strip ``(value, 0)`` as its tensions."""
    sub, _ = flat_masks(grid)
    if pattern is None:
        if gamma_sp is None or gamma_sv is None:
            raise ValueError("give gamma_sp and gamma_sv, or a pattern")
        return (SubstrateTerm(sub, float(gamma_sp), float(gamma_sv)),)
    X, _ = grid.mesh
    terms = []
    for (lo, hi), v in pattern.segments:
        m = sub * ((X >= lo) & (X < hi))
        if m.any():
            terms.append(SubstrateTerm(m, v, 0.0))
    return tuple(terms)


# ---------------------------------------------------------------------------
# state


class _Cache:
    """Time-step dependent convolutions that do not involve the particle."""

    def __init__(self):
        self.store: dict = {}

    def get(self, key, make):
        if key not in self.store:
            self.store[key] = make()
        return self.store[key]


@dataclass(frozen=True, eq=False)
class ObstacleState:
    particle: ScalarField
    substrate_mask: ScalarField
    up_mask: ScalarField
    kernel: SampledKernel
    gaussian: SampledKernel
    dt: float
    target_count: int
    terms: tuple = ()
    per_component_targets: tuple | None = None
    step_index: int = 0
    time: float = 0.0
    phi: ScalarField | None = None
    level: float | None = None
    cache: _Cache = field(default_factory=_Cache, repr=False)

    def __post_init__(self):
        p = self.particle.values
        if not np.all((p == 0) | (p == 1)):
            raise ValueError("particle must be a {0, 1} indicator")
        if np.any(p > self.up_mask.values):
            raise ValueError("particle must lie inside Omega_up")
        if self.dt <= 0:
            raise ValueError("time step must be positive")

    @property
    def grid(self) -> Grid:
        return self.particle.grid

    @property
    def count(self) -> int:
        return int(self.particle.values.sum())

    @property
    def area(self) -> float:
        return self.count * self.grid.cell_area

    @property
    def interface(self) -> SubgridInterface | None:
        """Sub-grid particle interface from the last thresholding, clipped to Omega_up."""
        if self.phi is None or self.level is None:
            return None
        # particle is {phi < level}: extract on -phi
        neg = ScalarField(self.grid, -self.phi.values)
        s = subgrid_extract(neg, -self.level, with_crossings=False)
        w = s.vertex_weights.values * self.up_mask.values
        return SubgridInterface(ScalarField(self.grid, w), s.cell_fractions, s.crossings)


def make_state(
    particle,
    kernel: SampledKernel,
    dt: float,
    gamma_sp: float | None = None,
    gamma_sv: float | None = None,
    pattern: SubstratePattern | None = None,
    per_component: bool = True,
) -> ObstacleState:
    """Initial state; the particle is clipped to Omega_up.

    When the initial particle has several components and ``per_component``
    is set, each component keeps its own grid count.
    """
    grid = kernel.grid
    sub, up = flat_masks(grid)
    vals = np.asarray(getattr(particle, "values", particle), dtype=float)
    p = ((vals >= 0.5) & (up > 0)).astype(float)
    if not p.any():
        raise ValueError("initial particle is empty")
    targets = None
    if per_component:
        comps = connected_components(p, grid=grid)
        if comps.count > 1:
            targets = tuple(int(c) for c in comps.cell_counts)
    return ObstacleState(
        particle=ScalarField(grid, p),
        substrate_mask=ScalarField(grid, sub),
        up_mask=ScalarField(grid, up),
        kernel=kernel,
        gaussian=build_gaussian(grid),
        dt=dt,
        target_count=int(p.sum()),
        terms=substrate_terms(grid, gamma_sp, gamma_sv, pattern),
        per_component_targets=targets,
    )


# ---------------------------------------------------------------------------
# one step


def _conv(s: ObstacleState, kernel: SampledKernel, values: np.ndarray, dt: float) -> np.ndarray:
    return convolve_values(values, kernel.multiplier(dt))


def _static_part(s: ObstacleState, dt: float) -> np.ndarray:
    """K_dt * 1_up + sum_i (gamma_SP,i - gamma_SV,i) G_dt * 1_{S_i}."""

    def make():
        out = _conv(s, s.kernel, s.up_mask.values, dt)
        for t in s.terms:
            d = t.gamma_sp - t.gamma_sv
            if d != 0.0:
                out = out + d * _conv(s, s.gaussian, t.mask, dt)
        return out

    return s.cache.get(("static", float(dt)), make)


def compute_phi(s: ObstacleState) -> ScalarField:
    u = s.particle.values
    val = (_static_part(s, s.dt) - 2.0 * _conv(s, s.kernel, u, s.dt)) / math.sqrt(s.dt)
    return ScalarField(s.grid, val)


def select_smallest(phi: np.ndarray, allowed: np.ndarray, M: int) -> tuple[np.ndarray, float]:
    """M allowed entries with the smallest phi; ties go to the lower row-major index.

    Returns the indicator and a level separating selected from rejected
    values (midpoint of the M-th and (M+1)-th smallest).
    """
    flat = phi.ravel()
    idx = np.flatnonzero(allowed.ravel() > 0)
    if M > idx.size:
        raise InsufficientDomain(f"{M} points requested but only {idx.size} available")
    out = np.zeros(flat.size)
    if M == 0:
        return out.reshape(phi.shape), -math.inf
    vals = flat[idx]
    if M == idx.size:
        out[idx] = 1.0
        return out.reshape(phi.shape), math.inf
    part = np.partition(vals, (M - 1, M))
    vM, vnext = part[M - 1], part[M]
    below = vals < vM
    chosen = idx[below]
    need = M - chosen.size
    ties = idx[vals == vM][:need]  # idx is increasing, so lower indices first
    out[chosen] = 1.0
    out[ties] = 1.0
    return out.reshape(phi.shape), 0.5 * (vM + vnext)


def assignment_regions(particle: np.ndarray, grid: Grid) -> tuple[np.ndarray, int]:
    """Label of the nearest particle component for every grid point.

    Distances are Euclidean to the component cells; ties go to the lower
    label.  Labels follow ``connected_components``.
    """
    comps = connected_components(particle, grid=grid)
    if comps.count <= 1:
        return np.where(np.ones_like(particle) > 0, 1, 0), comps.count
    best = np.full(particle.shape, np.inf)
    region = np.zeros(particle.shape, dtype=int)
    for lab in range(1, comps.count + 1):
        d = ndimage.distance_transform_edt(comps.labels != lab)
        closer = d < best
        region[closer] = lab
        best[closer] = d[closer]
    return region, comps.count


def threshold_area_preserving(phi: ScalarField, s: ObstacleState) -> tuple[np.ndarray, float]:
    """New particle indicator (and separating level) for the area constraint."""
    up = s.up_mask.values
    if s.per_component_targets is None:
        return select_smallest(phi.values, up, s.target_count)
    region, count = assignment_regions(s.particle.values, s.grid)
    targets = s.per_component_targets
    if count != len(targets):
        raise ValueError("per-component targets do not match the particle components")
    out = np.zeros_like(up)
    levels = []
    for lab, M in enumerate(targets, start=1):
        sel, lev = select_smallest(phi.values, up * (region == lab), M)
        out += sel
        levels.append(lev)
    return out, float(np.median(levels))


@dataclass(frozen=True)
class TopologyEvent:
    step: int
    kind: str
    components_before: int
    components_after: int
    counts: tuple
    areas: tuple

    def __post_init__(self):
        if self.kind == "Split" and not self.components_after > self.components_before:
            raise ValueError("a split must increase the component count")
        if self.kind == "Merge" and not self.components_after < self.components_before:
            raise ValueError("a merge must decrease the component count")
        if self.kind not in ("Split", "Merge"):
            raise ValueError(f"unknown event kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "kind": self.kind,
            "components_before": self.components_before,
            "components_after": self.components_after,
            "counts": list(self.counts),
            "areas": [float(a) for a in self.areas],
        }


def track_topology(prev: ObstacleState, nxt: ObstacleState) -> TopologyEvent | None:
    """Split/Merge event between two consecutive states, if any."""
    a = connected_components(prev.particle.values, grid=prev.grid)
    b = connected_components(nxt.particle.values, grid=nxt.grid)
    if a.count == b.count:
        return None
    counts = tuple(int(c) for c in b.cell_counts)
    areas = tuple(c * nxt.grid.cell_area for c in counts)
    kind = "Split" if b.count > a.count else "Merge"
    return TopologyEvent(nxt.step_index, kind, a.count, b.count, counts, areas)


def _reorder_targets(prev: ObstacleState, new_particle: np.ndarray) -> tuple | None:
    """Carry per-component targets over to the labels of the new particle."""
    targets = prev.per_component_targets
    comps = connected_components(new_particle, grid=prev.grid)
    if targets is None:
        return tuple(int(c) for c in comps.cell_counts) if comps.count > 1 else None
    if comps.count != len(targets):
        # topology changed: areas at the event step become the new targets
        return tuple(int(c) for c in comps.cell_counts) if comps.count > 1 else None
    region, _ = assignment_regions(prev.particle.values, prev.grid)
    out = []
    for lab in range(1, comps.count + 1):
        r = np.bincount(region[comps.labels == lab]).argmax()
        out.append(targets[r - 1])
    if sorted(out) != sorted(targets):
        return tuple(int(c) for c in comps.cell_counts)
    return tuple(out)


def step_algorithm2(s: ObstacleState, dt: float | None = None) -> ObstacleState:
    """One convolution/threshold step, optionally with a new time step."""
    if dt is not None and dt != s.dt:
        s = replace(s, dt=dt)
    phi = compute_phi(s)
    new, level = threshold_area_preserving(phi, s)
    targets = _reorder_targets(s, new)
    return replace(
        s,
        particle=ScalarField(s.grid, new),
        step_index=s.step_index + 1,
        time=s.time + s.dt,
        phi=phi,
        level=level,
        per_component_targets=targets,
    )


def three_phase_energy(s: ObstacleState) -> float:
    """Grid quadrature of the thresholding energy of the current state."""
    u = s.particle.values
    v = s.up_mask.values - u
    dt = s.dt
    total = float(np.sum(u * _conv(s, s.kernel, v, dt)))
    for t in s.terms:
        gs = s.cache.get(("G", id(t), float(dt)), lambda t=t: _conv(s, s.gaussian, t.mask, dt))
        total += t.gamma_sp * float(np.sum(u * gs))
        total += t.gamma_sv * float(np.sum(v * gs))
    return total * s.grid.cell_area / math.sqrt(dt)


def symmetric_difference(a: ObstacleState | np.ndarray, b: ObstacleState | np.ndarray, grid: Grid) -> float:
    av = a.particle.values if isinstance(a, ObstacleState) else np.asarray(a)
    bv = b.particle.values if isinstance(b, ObstacleState) else np.asarray(b)
    return float(np.count_nonzero(av != bv)) * grid.cell_area


# ---------------------------------------------------------------------------
# drivers


@dataclass
class RunResult:
    final: ObstacleState
    energies: list
    events: list
    snapshots: list
    dts: list
    halvings: list = field(default_factory=list)
    stationary: bool = False


def _record(result: RunResult, prev: ObstacleState, nxt: ObstacleState, energy: bool, snap_every: int):
    if energy:
        result.energies.append((nxt.step_index, nxt.time, nxt.dt, three_phase_energy(nxt)))
    ev = track_topology(prev, nxt)
    if ev is not None:
        result.events.append(ev)
    if snap_every and nxt.step_index % snap_every == 0:
        result.snapshots.append(nxt)
    result.dts.append(nxt.dt)


def run_algorithm2(
    s: ObstacleState,
    n_steps: int,
    energy: bool = True,
    snap_every: int = 0,
    callback: Callable[[ObstacleState, ObstacleState], None] | None = None,
) -> RunResult:
    """Fixed number of steps at a fixed time step."""
    res = RunResult(s, [], [], [s] if snap_every else [], [])
    if energy:
        res.energies.append((s.step_index, s.time, s.dt, three_phase_energy(s)))
    for _ in range(n_steps):
        nxt = step_algorithm2(s)
        _record(res, s, nxt, energy, snap_every)
        if callback is not None:
            callback(s, nxt)
        s = nxt
    res.final = s
    return res


def run_algorithm2_to_stationary(
    s: ObstacleState,
    max_steps: int = 5000,
    patience: int = 3,
    energy: bool = False,
    snap_every: int = 0,
    callback: Callable[[ObstacleState, ObstacleState], None] | None = None,
) -> RunResult:
    """Iterate until ``patience`` consecutive steps leave the particle unchanged."""
    res = RunResult(s, [], [], [s] if snap_every else [], [])
    quiet = 0
    for _ in range(max_steps):
        nxt = step_algorithm2(s)
        _record(res, s, nxt, energy, snap_every)
        if callback is not None:
            callback(s, nxt)
        quiet = quiet + 1 if np.array_equal(nxt.particle.values, s.particle.values) else 0
        s = nxt
        if quiet >= patience:
            res.final = s
            res.stationary = True
            return res
    res.final = s
    raise MaxSteps(f"no stationary state within {max_steps} steps", result=res)


@dataclass(frozen=True)
class TimeScalingConfig:
    dt0: float
    tau: float
    max_steps: int = 5000

    def __post_init__(self):
        if self.dt0 <= 0 or self.tau <= 0:
            raise ValueError("dt0 and tau must be positive")

    @classmethod
    def for_area(cls, dt0: float, area: float, rel_tau: float = 1e-4, max_steps: int = 5000):
        return cls(dt0, rel_tau * area, max_steps)


def run_algorithm3(
    s: ObstacleState,
    cfg: TimeScalingConfig,
    energy: bool = False,
    snap_every: int = 0,
    callback: Callable[[ObstacleState, ObstacleState], None] | None = None,
) -> RunResult:
    """Area-preserving evolution with time-step halving.

    After each step with ``|P^k - P^{k+1}| <= tau`` the time step is halved
    (and the reference set updated) unless the new set is within ``tau`` of
    the reference set, in which case the run terminates.
    """
    s = replace(s, dt=cfg.dt0)
    ref = s.particle.values
    res = RunResult(s, [], [], [s] if snap_every else [], [])
    for _ in range(cfg.max_steps):
        nxt = step_algorithm2(s)
        _record(res, s, nxt, energy, snap_every)
        if callback is not None:
            callback(s, nxt)
        d_step = symmetric_difference(s, nxt, s.grid)
        s = nxt
        if d_step > cfg.tau:
            continue
        if symmetric_difference(ref, nxt, s.grid) >= cfg.tau:
            res.halvings.append((s.step_index, s.dt, s.dt / 2))
            s = replace(s, dt=s.dt / 2)
            ref = s.particle.values
            continue
        res.final = s
        res.stationary = True
        return res
    res.final = s
    raise MaxSteps(f"time scaling did not terminate within {cfg.max_steps} steps", result=res)


# ---------------------------------------------------------------------------
# measurements


@dataclass(frozen=True)
class ContactAngles:
    left: float
    right: float

    @property
    def degrees(self) -> tuple[float, float]:
        return math.degrees(self.left), math.degrees(self.right)


def _contact_points(s: ObstacleState) -> np.ndarray:
    """Interface points of the particle in Omega_up (sub-grid when possible)."""
    g = s.grid
    if s.phi is not None:
        field_ = ScalarField(g, -s.phi.values)
        lines = interface_polylines(field_, -s.level)
    else:
        smooth = ndimage.uniform_filter(s.particle.values, size=3, mode="wrap")
        lines = interface_polylines(ScalarField(g, smooth), 0.5)
    if not lines:
        return np.empty((0, 2))
    return np.concatenate(lines, axis=0)


def measure_contact_angles(s: ObstacleState, band: tuple[float, float] = (3.0, 20.0)) -> ContactAngles:
    """Signed contact angles (radians) from line fits near the substrate.

    Points with ``band[0] dx <= y <= band[1] dx`` on each side of the contact
    region are fitted by ``x = x0 + m y``.  The result uses the normal-angle
    convention: left in (0, pi), right in (-pi, 0), and 90 degrees means a
    vertical wall.
    """
    g = s.grid
    _, Y = g.mesh
    X, _ = g.mesh
    row0 = np.argmin(np.abs(g.y))
    touching = np.flatnonzero(s.particle.values[row0] > 0)
    if touching.size == 0:
        raise NoContact("particle does not touch the substrate")
    x_left, x_right = g.x[touching[0]], g.x[touching[-1]]
    mid = 0.5 * (x_left + x_right)
    pts = _contact_points(s)
    lo, hi = band[0] * g.dx, band[1] * g.dx
    near = pts[(pts[:, 1] >= lo) & (pts[:, 1] <= hi)]
    reach = hi + 3 * g.dx
    left = near[(near[:, 0] < mid) & (np.abs(near[:, 0] - x_left) <= reach + hi)]
    right = near[(near[:, 0] >= mid) & (np.abs(near[:, 0] - x_right) <= reach + hi)]
    if len(left) < 2 or len(right) < 2:
        raise NoContact("not enough interface points near the substrate")
    mL = np.polyfit(left[:, 1], left[:, 0], 1)[0]
    mR = np.polyfit(right[:, 1], right[:, 0], 1)[0]
    return ContactAngles(math.atan2(1.0, mL), math.atan2(-1.0, -mR))


def shape_error(s: ObstacleState, polygon: np.ndarray, align: bool = True) -> float:
    """Symmetric difference between the particle and a polygon, relative to the particle area.

    With ``align`` the polygon is shifted horizontally so that its centroid
    matches the particle's.
    """
    g = s.grid
    poly = np.asarray(polygon, dtype=float).copy()
    if align:
        X, _ = g.mesh
        u = s.particle.values
        cx = float((X * u).sum() / u.sum())
        poly[:, 0] += cx - _polygon_centroid_x(poly)
    _, target = polygon_indicator(g, poly)
    iface = s.interface
    w = iface.vertex_weights.values if iface is not None else s.particle.values
    diff = np.abs(w - target.vertex_weights.values * s.up_mask.values).sum() * g.cell_area
    return float(diff / s.area)


def _polygon_centroid_x(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y1 - x1 * y
    a = cross.sum() / 2.0
    return float(((x + x1) * cross).sum() / (6.0 * a))
