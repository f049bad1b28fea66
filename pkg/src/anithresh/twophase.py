"""Threshold dynamics for a free particle (two phases).

One step of the scheme convolves the particle indicator with the rescaled
kernel and keeps the points where the result reaches half the kernel mass.
The area-preserving variant keeps a fixed number of grid points instead.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .anisotropy import Elliptic, wulff_envelope
from .errors import Extinct, PastExtinction
from .grid import Grid, ScalarField, SubgridInterface, convolve, l1_difference, subgrid_extract
from .kernels import KernelSpec, SampledKernel, build_kernel


@dataclass(frozen=True, eq=False)
class TwoPhaseState:
    indicator: ScalarField
    kernel: SampledKernel
    dt: float
    step_index: int = 0
    interface: SubgridInterface | None = None

    def __post_init__(self):
        v = self.indicator.values
        if not np.all((v == 0) | (v == 1)):
            raise ValueError("indicator must take values in {0, 1}")
        if self.dt <= 0:
            raise ValueError("time step must be positive")

    @property
    def grid(self) -> Grid:
        return self.indicator.grid

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    @property
    def count(self) -> int:
        return int(self.indicator.values.sum())

    @property
    def area(self) -> float:
        """Sub-grid area when available, otherwise grid-point count times dx^2."""
        if self.interface is not None:
            return self.interface.area()
        return self.count * self.grid.cell_area


def initial_state(indicator, kernel: SampledKernel, dt: float) -> TwoPhaseState:
    vals = np.asarray(getattr(indicator, "values", indicator), dtype=float)
    return TwoPhaseState(ScalarField(kernel.grid, (vals >= 0.5).astype(float)), kernel, dt)


def select_largest(U: np.ndarray, M: int) -> np.ndarray:
    """Indicator of the M entries of U with the largest values.

    Ties are resolved in favour of the lower row-major index.
    """
    flat = U.ravel()
    if not 0 <= M <= flat.size:
        raise ValueError(f"M must lie in [0, {flat.size}]")
    out = np.zeros(flat.size)
    if M:
        out[np.argsort(-flat, kind="stable")[:M]] = 1.0
    return out.reshape(U.shape)


def step_algorithm1(s: TwoPhaseState) -> TwoPhaseState:
    """Convolve, then threshold at half the kernel mass."""
    U = convolve(s.indicator, s.kernel, s.dt)
    level = 0.5 * s.kernel.mass
    new = (U.values >= level).astype(float)
    if not new.any():
        raise Extinct(f"particle vanished at step {s.step_index + 1}")
    iface = subgrid_extract(U, level, with_crossings=False)
    return TwoPhaseState(ScalarField(s.grid, new), s.kernel, s.dt, s.step_index + 1, iface)


def step_area_preserving(s: TwoPhaseState, M: int) -> TwoPhaseState:
    """Convolve, then keep exactly the M grid points with the largest values."""
    U = convolve(s.indicator, s.kernel, s.dt)
    new = select_largest(U.values, M)
    iface = None
    if 0 < M < new.size:
        # level halfway between the last kept and the first rejected value
        flat = np.sort(U.values.ravel())[::-1]
        level = 0.5 * (flat[M - 1] + flat[M])
        iface = subgrid_extract(U, level, with_crossings=False)
    return TwoPhaseState(ScalarField(s.grid, new), s.kernel, s.dt, s.step_index + 1, iface)


def lyapunov_energy(s: TwoPhaseState) -> float:
    """E = dt^{-1/2} int_{outside} K_dt * 1_P."""
    U = convolve(s.indicator, s.kernel, s.dt).values
    outside = s.indicator.values == 0
    return float(U[outside].sum()) * s.grid.cell_area / math.sqrt(s.dt)


def evolve(
    s: TwoPhaseState,
    n_steps: int,
    area_preserving: bool = False,
) -> Iterator[TwoPhaseState]:
    """Yield the states after each of ``n_steps`` steps."""
    M = s.count
    for _ in range(n_steps):
        s = step_area_preserving(s, M) if area_preserving else step_algorithm1(s)
        yield s


def run_to_stationary(s: TwoPhaseState, max_steps: int = 2000, patience: int = 3) -> TwoPhaseState:
    """Area-preserving evolution until ``patience`` consecutive steps change nothing."""
    from .errors import MaxSteps

    M = s.count
    quiet = 0
    for _ in range(max_steps):
        nxt = step_area_preserving(s, M)
        quiet = quiet + 1 if np.array_equal(nxt.indicator.values, s.indicator.values) else 0
        s = nxt
        if quiet >= patience:
            return s
    raise MaxSteps(f"no stationary state within {max_steps} steps", result=s)


# ---------------------------------------------------------------------------
# self-similar oracle


def selfsimilar_oracle(a: float, b: float, t: float, theta):
    """Point(s) of the shrinking Wulff shape of Elliptic(a, b) at time t.

    Under V = gamma (gamma + gamma'') kappa the Wulff shape shrinks
    self-similarly with factor sqrt(1 - 2t) and vanishes at t = 1/2.
    """
    if t > 0.5:
        raise PastExtinction(f"t = {t} is past the extinction time 1/2")
    x, y = wulff_envelope(Elliptic(a, b), theta)
    f = math.sqrt(max(0.0, 1.0 - 2.0 * t))
    return f * x, f * y


def ellipse_level(grid: Grid, a: float, b: float, t: float) -> ScalarField:
    """Level function positive inside the oracle ellipse at time t."""
    if t > 0.5:
        raise PastExtinction(f"t = {t} is past the extinction time 1/2")
    X, Y = grid.mesh
    return ScalarField(grid, math.sqrt(1.0 - 2.0 * t) - np.hypot(X / a, Y / b))


def oracle_interface(grid: Grid, a: float, b: float, t: float) -> SubgridInterface:
    return subgrid_extract(ellipse_level(grid, a, b, t), 0.0, with_crossings=False)


# ---------------------------------------------------------------------------
# convergence study


@dataclass
class ConvergenceRow:
    kernel: str
    n: int
    dx: float
    dt: float
    steps: int
    error: float
    order: float
    wall_time: float


def convergence_kernel(family: str, grid: Grid, a: float, b: float) -> SampledKernel:
    """Kernel realising V = gamma (gamma + gamma'') kappa for Elliptic(a, b)."""
    if family not in ("bbc", "ejz_physical", "ejz_fourier"):
        raise ValueError("the convergence study supports the bbc and ejz families")
    gam = Elliptic(a, b)
    return build_kernel(KernelSpec(family, gam, gam, normalization="gaussian"), grid)


def convergence_error(
    kernel: SampledKernel,
    dt: float,
    a: float = 1.0,
    b: float = 2.0,
    t_end: float = 0.25,
    callback: Callable[[TwoPhaseState, float], None] | None = None,
) -> float:
    """Max over steps up to t_end of the L1 distance to the oracle."""
    grid = kernel.grid
    steps = int(round(t_end / dt))
    s0 = ellipse_level(grid, a, b, 0.0)
    s = initial_state((s0.values >= 0).astype(float), kernel, dt)
    err = 0.0
    for s in evolve(s, steps):
        e = l1_difference(s.interface, oracle_interface(grid, a, b, s.time))
        err = max(err, e)
        if callback is not None:
            callback(s, e)
    return err


def run_convergence(
    kernel_family: str,
    n_list: Sequence[int],
    dt_list: Sequence[float],
    a: float = 1.0,
    b: float = 2.0,
    half_width: float = 5.0,
    t_end: float = 0.25,
    csv_path: str | Path | None = None,
) -> list[ConvergenceRow]:
    """Error table over grid sizes and time steps.

    The order for a row is ``log2(e(2 dt) / e(dt))`` when the doubled step is
    also in the sweep (NaN otherwise).  Defaults start from the ellipse
    ``x^2 + (y/2)^2 = 1``, the Wulff shape of Elliptic(1, 2).
    """
    rows: list[ConvergenceRow] = []
    for n in n_list:
        grid = Grid(n, -half_width, half_width, -half_width, half_width)
        K = convergence_kernel(kernel_family, grid, a, b)
        errors: dict[float, float] = {}
        for dt in sorted(dt_list, reverse=True):
            t0 = time.perf_counter()
            e = convergence_error(K, dt, a, b, t_end)
            wall = time.perf_counter() - t0
            errors[dt] = e
            prev = errors.get(2.0 * dt)
            order = math.log2(prev / e) if prev and e > 0 else float("nan")
            rows.append(ConvergenceRow(kernel_family, n, grid.dx, dt, int(round(t_end / dt)), e, order, wall))
            K.clear_cache()
    if csv_path is not None:
        write_convergence_csv(csv_path, rows)
    return rows


def write_convergence_csv(path, rows: Sequence[ConvergenceRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kernel", "n", "dx", "dt", "steps", "error", "order", "wall_time"])
        for r in rows:
            w.writerow([r.kernel, r.n, f"{r.dx:.10g}", f"{r.dt:.10g}", r.steps, f"{r.error:.10g}", f"{r.order:.6g}", f"{r.wall_time:.4g}"])


def optimal_row(rows: Sequence[ConvergenceRow]) -> ConvergenceRow:
    return min(rows, key=lambda r: r.error)
