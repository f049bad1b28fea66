"""Run validated configs and write their reports."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..anisotropy import (
    AnisotropyFn,
    anisotropy_from_dict,
    classify,
    polygon_area,
    solve_young,
    winterbottom_shape,
    wulff_envelope,
)
from ..errors import Extinct, MaxSteps, NoContact, NoRoot, NotWeak
from ..grid import Grid, ScalarField, interface_polylines, polygon_indicator, write_pgm
from ..kernels import KernelSpec, SampledKernel, build_kernel, kernel_table
from .. import obstacle as ob
from .. import twophase as tp
from .config import ExperimentConfig, serialize
from .shapes import shape_indicator


@dataclass
class Snapshot:
    step: int
    time: float
    indicator: np.ndarray
    polylines: list


@dataclass
class ExperimentReport:
    name: str
    mode: str
    summary: dict = field(default_factory=dict)
    energy: list = field(default_factory=list)  # (step, time, dt, energy)
    events: list = field(default_factory=list)  # dicts
    snapshots: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    timing: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    grid: Grid | None = None
    config: ExperimentConfig | None = None
    final_state: object = None


# ---------------------------------------------------------------------------
# builders


def make_grid(cfg: ExperimentConfig) -> Grid:
    g = cfg["grid"]
    x0, x1, y0, y1 = g["bounds"]
    return Grid(g["n"], x0, x1, y0, y1)


def anisotropy_of(cfg: ExperimentConfig) -> AnisotropyFn:
    return anisotropy_from_dict(cfg["anisotropy"])


def mobility_of(cfg: ExperimentConfig) -> AnisotropyFn | None:
    m = cfg.get("mobility")
    return anisotropy_from_dict(m) if m else None


def kernel_spec(cfg: ExperimentConfig, family: str | None = None) -> KernelSpec:
    k = cfg["kernel"]
    fam = family or k["family"]
    return KernelSpec(
        fam,
        anisotropy_of(cfg),
        mobility_of(cfg),
        eps=float(k.get("eps", 0.1)),
        n_dirs=int(k.get("n_dirs", 256)),
        normalization=k.get("normalization", "gaussian"),
    )


def make_kernel(cfg: ExperimentConfig, grid: Grid, family: str | None = None) -> SampledKernel:
    return build_kernel(kernel_spec(cfg, family), grid)


def _pattern(cfg) -> ob.SubstratePattern | None:
    p = cfg.get("pattern")
    if not p:
        return None
    return ob.SubstratePattern(tuple(((float(s[0][0]), float(s[0][1])), float(s[1])) for s in p))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


class _Dumper:
    """Collects snapshots every ``interval`` steps plus the final one."""

    def __init__(self, interval: int, grid: Grid):
        self.interval = interval
        self.grid = grid
        self.items: list[Snapshot] = []

    def add(self, step, t, indicator, level_field=None, level=None):
        if level_field is not None and level is not None and math.isfinite(level):
            lines = interface_polylines(level_field, level)
        else:
            lines = interface_polylines(ScalarField(self.grid, indicator), 0.5)
        self.items.append(Snapshot(step, t, indicator.copy(), lines))

    def wants(self, step) -> bool:
        return self.interval > 0 and step % self.interval == 0

    def finish(self, step, t, indicator, **kw):
        if not self.items or self.items[-1].step != step:
            self.add(step, t, indicator, **kw)


# ---------------------------------------------------------------------------
# modes


def _run_free(cfg: ExperimentConfig, rep: ExperimentReport):
    grid = make_grid(cfg)
    K = make_kernel(cfg, grid)
    dt = float(cfg["dt"])
    ind = shape_indicator(grid, cfg["shape"])
    s = tp.initial_state(ind, K, dt)
    M = s.count
    dump = _Dumper(int(cfg["dump_interval"]), grid)
    dump.add(0, 0.0, s.indicator.values)
    rep.energy.append((0, 0.0, dt, tp.lyapunov_energy(s)))
    area_pres = cfg["algorithm"] == "area-preserving"
    quiet, stationary, extinct = 0, False, False
    for _ in range(int(cfg["max_steps"])):
        try:
            nxt = tp.step_area_preserving(s, M) if area_pres else tp.step_algorithm1(s)
        except Extinct:
            extinct = True
            break
        rep.energy.append((nxt.step_index, nxt.time, dt, tp.lyapunov_energy(nxt)))
        same = np.array_equal(nxt.indicator.values, s.indicator.values)
        s = nxt
        if dump.wants(s.step_index):
            dump.add(s.step_index, s.time, s.indicator.values)
        quiet = quiet + 1 if same else 0
        if cfg["stop"] == "stationary" and quiet >= 3:
            stationary = True
            break
    dump.finish(s.step_index, s.time, s.indicator.values)
    rep.snapshots = dump.items
    rep.summary.update(
        steps=s.step_index,
        final_time=s.time,
        initial_count=M,
        final_count=s.count,
        final_area=s.area,
        final_energy=rep.energy[-1][3],
        extinct=extinct,
        stationary=stationary,
        kernel_mass=K.mass,
    )
    gam = anisotropy_of(cfg)
    if area_pres and s.count > 0:
        rep.summary["wulff_shape_error"] = wulff_error(s, gam)
    rep.final_state = s
    rep.grid = grid


def wulff_error(s: tp.TwoPhaseState, gam: AnisotropyFn) -> float:
    """Symmetric difference to the equal-area Wulff shape (centroid aligned), relative to the area."""
    g = s.grid
    th = np.linspace(-math.pi, math.pi, 2048, endpoint=False)
    x, y = wulff_envelope(gam, th)
    poly = np.c_[x, y]
    a0 = abs(polygon_area(poly))
    poly = poly * math.sqrt(s.count * g.cell_area / a0)
    X, Y = g.mesh
    u = s.indicator.values
    cx, cy = (X * u).sum() / u.sum(), (Y * u).sum() / u.sum()
    poly = poly - poly.mean(axis=0) + [cx, cy]
    target = polygon_indicator(g, poly)[0]
    return float(np.abs(u - target).sum() / u.sum())


def substrate_state(cfg: ExperimentConfig, grid: Grid | None = None, K: SampledKernel | None = None) -> ob.ObstacleState:
    grid = grid or make_grid(cfg)
    K = K or make_kernel(cfg, grid)
    ind = shape_indicator(grid, cfg["shape"])
    dt = float(cfg.get("dt") or cfg["time_scaling"]["dt0"])
    pat = _pattern(cfg)
    t = cfg.get("tensions") or {}
    return ob.make_state(ind, K, dt, t.get("gamma_sp"), t.get("gamma_sv"), pat)


def _run_substrate(cfg: ExperimentConfig, rep: ExperimentReport):
    grid = make_grid(cfg)
    s0 = substrate_state(cfg, grid)
    dump = _Dumper(int(cfg["dump_interval"]), grid)
    dump.add(0, 0.0, s0.particle.values)
    rep.energy.append((0, 0.0, s0.dt, ob.three_phase_energy(s0)))

    def cb(prev, nxt):
        rep.energy.append((nxt.step_index, nxt.time, nxt.dt, ob.three_phase_energy(nxt)))
        if dump.wants(nxt.step_index):
            dump.add(nxt.step_index, nxt.time, nxt.particle.values, ScalarField(grid, -nxt.phi.values), -nxt.level)

    max_steps = int(cfg["max_steps"])
    stationary = False
    halvings = []
    try:
        if cfg["algorithm"] == "alg3":
            ts = cfg["time_scaling"]
            tcfg = ob.TimeScalingConfig.for_area(float(ts["dt0"]), s0.area, float(ts.get("rel_tau", 1e-4)), max_steps)
            res = ob.run_algorithm3(s0, tcfg, callback=cb)
            halvings = res.halvings
            stationary = res.stationary
        elif cfg["stop"] == "stationary":
            res = ob.run_algorithm2_to_stationary(s0, max_steps=max_steps, callback=cb)
            stationary = res.stationary
        else:
            res = ob.run_algorithm2(s0, max_steps, energy=False, callback=cb)
    except MaxSteps as exc:
        res = exc.result
        rep.notes.append(str(exc))
    s = res.final
    dump.finish(
        s.step_index,
        s.time,
        s.particle.values,
        level_field=ScalarField(grid, -s.phi.values) if s.phi is not None else None,
        level=-s.level if s.level is not None else None,
    )
    rep.snapshots = dump.items
    rep.events = [e.to_dict() for e in res.events]
    counts = [int(round(np.sum(sn.indicator))) for sn in dump.items]
    rep.summary.update(
        steps=s.step_index,
        final_time=s.time,
        final_dt=s.dt,
        target_count=s0.target_count,
        final_count=s.count,
        counts_conserved=all(c == s0.target_count for c in counts) and s.count == s0.target_count,
        final_area=s.area,
        final_energy=rep.energy[-1][3],
        stationary=stationary,
        halvings=len(halvings),
        n_events=len(rep.events),
        n_splits=sum(e["kind"] == "Split" for e in rep.events),
        n_merges=sum(e["kind"] == "Merge" for e in rep.events),
    )
    try:
        ang = ob.measure_contact_angles(s)
        rep.summary["contact_left_deg"], rep.summary["contact_right_deg"] = ang.degrees
    except NoContact as exc:
        rep.notes.append(f"contact angles: {exc}")
    t = cfg.get("tensions")
    if t and not cfg.get("pattern"):
        gam = anisotropy_of(cfg)
        try:
            y = solve_young(gam, t["gamma_sp"], t["gamma_sv"])
            rep.summary["young_left_deg"], rep.summary["young_right_deg"] = y.degrees
            if classify(gam).admissible:
                poly = winterbottom_shape(gam, t["gamma_sp"], t["gamma_sv"], s.area)
                rep.summary["winterbottom_error"] = ob.shape_error(s, poly)
        except (NoRoot, NotWeak) as exc:
            rep.notes.append(f"oracle: {exc}")
    rep.final_state = s
    rep.grid = grid


def _run_convergence(cfg: ExperimentConfig, rep: ExperimentReport):
    c = cfg["convergence"]
    rows_all = []
    for fam in c["families"]:
        rows = tp.run_convergence(fam, c["n_list"], c["dt_list"], c["a"], c["b"], c["half_width"], c["t_end"])
        rows_all.extend(rows)
        for n in c["n_list"]:
            sub = [r for r in rows if r.n == n]
            best = tp.optimal_row(sub)
            rep.summary[f"{fam}_n{n}_optimal_dt"] = best.dt
            rep.summary[f"{fam}_n{n}_optimal_error"] = best.error
            rep.summary[f"{fam}_n{n}_order_at_optimum"] = best.order
            small = [r for r in sub if r.dt < best.dt]
            rep.summary[f"{fam}_n{n}_v_shape"] = bool(small) and max(r.error for r in small) > best.error
            rep.timing[f"{fam}_n{n}"] = sum(r.wall_time for r in sub)
    rep.tables["convergence"] = (
        ["kernel", "n", "dx", "dt", "steps", "error", "order"],
        [[r.kernel, r.n, r.dx, r.dt, r.steps, r.error, r.order] for r in rows_all],
    )
    rep.tables["convergence_timing"] = (
        ["kernel", "n", "dt", "wall_time"],
        [[r.kernel, r.n, r.dt, round(r.wall_time, 3)] for r in rows_all],
    )
    rep.notes.append("desk scale: the reference runs used n = 2^13 to 2^14; absolute errors are not comparable")


def _run_kernel_info(cfg: ExperimentConfig, rep: ExperimentReport):
    grid = make_grid(cfg)
    ki = cfg["kernel_info"]
    for fam in ki["families"]:
        t0 = time.perf_counter()
        K = make_kernel(cfg, grid, fam)
        rows = kernel_table(K, ki["directions"])
        keys = ["theta", "gamma_K", "mu_K", "gamma_target", "mu_target"]
        rep.tables[f"kernel_{fam}"] = (keys, [[r.get(k, float("nan")) for k in keys] for r in rows])
        dg = max(abs(r["gamma_K"] / r["gamma_target"] - 1) for r in rows if "gamma_target" in r)
        dm = max(abs(r["mu_K"] / r["mu_target"] - 1) for r in rows if "mu_target" in r)
        rep.summary[f"{fam}_mass"] = K.mass
        rep.summary[f"{fam}_max_rel_dev_gamma"] = dg
        rep.summary[f"{fam}_max_rel_dev_mu"] = dm
        rep.summary[f"{fam}_physical_origin"] = K.physical_origin
        for k, v in sorted(K.info.items()):
            rep.summary[f"{fam}_{k}"] = v
        # slices through the origin along the x axis
        kx = grid.frequencies[0][0]
        spec_row = K.spectral[0]
        phys_row = K.physical(1.0)[0] if K.has_physical else None
        order = np.argsort(kx)
        xs = grid.centered[0][0]
        xorder = np.argsort(xs)
        rep.tables[f"slice_{fam}"] = (
            ["xi", "K_hat", "x", "K"],
            [
                [kx[i], spec_row[i], xs[j], phys_row[j] if phys_row is not None else float("nan")]
                for i, j in zip(order, xorder)
            ],
        )
        rep.timing[f"kernel_{fam}"] = time.perf_counter() - t0
    rep.grid = grid


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.get("name", "experiment"), cfg.mode, config=cfg)
    t0 = time.perf_counter()
    {
        "free": _run_free,
        "substrate": _run_substrate,
        "convergence": _run_convergence,
        "kernel-info": _run_kernel_info,
    }[cfg.mode](cfg, rep)
    rep.timing["total"] = time.perf_counter() - t0
    if cfg.get("notes"):
        rep.notes.append(str(cfg["notes"]))
    return rep


# ---------------------------------------------------------------------------
# output


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def emit_report(rep: ExperimentReport, out_dir) -> list[Path]:
    """Write the report files and return their paths.

    ``report.csv``, ``energy.csv`` and ``events.jsonl`` are always written;
    snapshots go to ``snapshots/`` and ``interfaces/``.  Wall times are kept
    in ``timing.json`` so that the CSV files are reproducible byte for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    p = out / "report.csv"
    rows = [["name", rep.name], ["mode", rep.mode]] + [[k, v] for k, v in rep.summary.items()]
    rows += [[f"note_{i}", n] for i, n in enumerate(rep.notes)]
    _write_csv(p, ["key", "value"], rows)
    written.append(p)

    p = out / "energy.csv"
    _write_csv(p, ["step", "time", "dt", "energy"], rep.energy)
    written.append(p)

    p = out / "events.jsonl"
    with p.open("w") as fh:
        for e in rep.events:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    written.append(p)

    for name, (header, rows_) in sorted(rep.tables.items()):
        p = out / f"{name}.csv"
        _write_csv(p, header, rows_)
        written.append(p)

    if rep.snapshots:
        sd, idir = out / "snapshots", out / "interfaces"
        sd.mkdir(exist_ok=True)
        idir.mkdir(exist_ok=True)
        for sn in rep.snapshots:
            p = sd / f"step_{sn.step:06d}.pgm"
            write_pgm(p, ScalarField(rep.grid, sn.indicator), 0.0, 1.0)
            written.append(p)
            p = idir / f"step_{sn.step:06d}.csv"
            _write_csv(p, ["curve", "x", "y"], [[i, x, y] for i, line in enumerate(sn.polylines) for x, y in line])
            written.append(p)

    p = out / "timing.json"
    p.write_text(json.dumps({k: round(v, 3) for k, v in rep.timing.items()}, sort_keys=True, indent=1) + "\n")
    written.append(p)
    if rep.config is not None:
        p = out / "config.yaml"
        p.write_text(serialize(rep.config))
        written.append(p)
    return written
