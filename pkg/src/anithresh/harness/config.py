"""Experiment configuration.

Configs are YAML mappings.  Every key is validated and unknown keys are
rejected with the offending field named.  Grammar (all keys optional
unless noted)::

    name: str                      # label used in reports
    mode: free | substrate | convergence | kernel-info   (required)
    algorithm: threshold | area-preserving | alg2 | alg3
    grid: {n: int, bounds: [x_min, x_max, y_min, y_max]}
    kernel: {family: gaussian|bbc|ee|ejz_physical|ejz_fourier,
             eps: float, n_dirs: int, normalization: raw|gaussian}
    anisotropy: {type: constant|cosine|elliptic|crystalline, ...}
    mobility: same form as anisotropy (defaults to the anisotropy)
    tensions: {gamma_sp: float, gamma_sv: float}
    pattern: [[[x_lo, x_hi], value], ...]  # replaces tensions
    shape: {type: ellipse|circle|rectangle|triangle-pair|polygon|s-shape, ...}
    dt: float
    time_scaling: {dt0: float, rel_tau: float}
    max_steps: int
    stop: fixed | stationary
    dump_interval: int
    convergence: {families: [..], n_list: [..], dt_list: [..],
                  a: float, b: float, half_width: float, t_end: float}
    kernel_info: {families: [..], directions: int}
    output: str

Flag overrides use dotted keys, e.g. ``grid.n=256``; values are parsed as
YAML scalars.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..anisotropy import anisotropy_from_dict, classify
from ..errors import ParseError, ValidationError

MODES = ("free", "substrate", "convergence", "kernel-info")
ALGORITHMS = {
    "free": ("threshold", "area-preserving"),
    "substrate": ("alg2", "alg3"),
    "convergence": ("threshold",),
    "kernel-info": ("threshold",),
}
SHAPES = ("ellipse", "circle", "rectangle", "triangle-pair", "polygon", "s-shape")
FAMILIES = ("gaussian", "bbc", "ee", "ejz_physical", "ejz_fourier")

_TOP_KEYS = {
    "name", "mode", "algorithm", "grid", "kernel", "anisotropy", "mobility", "tensions",
    "pattern", "shape", "dt", "time_scaling", "max_steps", "stop", "dump_interval",
    "convergence", "kernel_info", "output", "notes",
}
_SUB_KEYS = {
    "grid": {"n", "bounds"},
    "kernel": {"family", "eps", "n_dirs", "normalization"},
    "tensions": {"gamma_sp", "gamma_sv"},
    "time_scaling": {"dt0", "rel_tau"},
    "convergence": {"families", "n_list", "dt_list", "a", "b", "half_width", "t_end"},
    "kernel_info": {"families", "directions"},
}
_SHAPE_KEYS = {
    "ellipse": {"center", "axes"},
    "circle": {"center", "radius"},
    "rectangle": {"x", "y"},
    "triangle-pair": {"gap", "width", "height"},
    "polygon": {"vertices"},
    "s-shape": {"file", "scale", "center"},
}
_ANISO_KEYS = {
    "constant": {"c"},
    "cosine": {"modes"},
    "elliptic": {"a", "b"},
    "crystalline": {"eps"},
}


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    @property
    def mode(self) -> str:
        return self.data["mode"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_yaml(self) -> str:
        return serialize(self)


DEFAULTS: dict[str, Any] = {
    "name": "experiment",
    "grid": {"n": 512, "bounds": [-5.0, 5.0, -5.0, 5.0]},
    "kernel": {"family": "bbc", "normalization": "gaussian"},
    "anisotropy": {"type": "constant", "c": 1.0},
    "max_steps": 1000,
    "stop": "fixed",
    "dump_interval": 0,
    "output": "out",
}


_TYPED = ("shape", "anisotropy", "mobility")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        # a typed section is replaced when its type changes, merged otherwise
        retyped = k in _TYPED and isinstance(v, dict) and v.get("type", out.get(k, {}).get("type")) != out.get(k, {}).get("type")
        if isinstance(v, dict) and isinstance(out.get(k), dict) and not retyped:
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _set_dotted(d: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = value


def parse_overrides(flags) -> dict:
    """``["grid.n=256", "dt=0.01"]`` -> nested dict of YAML-parsed values."""
    out: dict = {}
    for f in flags or []:
        if "=" not in f:
            raise ParseError(f"override {f!r} is not of the form key=value")
        k, v = f.split("=", 1)
        try:
            val = yaml.safe_load(v)
        except yaml.YAMLError as exc:
            raise ParseError(f"override {k}: {exc}") from None
        _set_dotted(out, k.strip(), val)
    return out


def load_text(text: str) -> dict:
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from None
    if d is None:
        d = {}
    if not isinstance(d, dict):
        raise ParseError("configuration must be a mapping")
    return d


def parse_config(source=None, overrides=None, base: dict | None = None) -> ExperimentConfig:
    """Parse a config file, YAML text, or mapping; apply overrides; validate.

    ``source`` may be a path, a YAML string, a dict or None.  ``overrides`` is
    a dict or a list of ``key=value`` strings and wins over file keys.
    """
    if source is None:
        d = {}
    elif isinstance(source, dict):
        d = copy.deepcopy(source)
    elif isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and source.endswith((".yaml", ".yml"))):
        p = Path(source)
        if not p.exists():
            raise ParseError(f"config file {p} does not exist")
        d = load_text(p.read_text())
    else:
        d = load_text(str(source))
    if base:
        d = _merge(base, d)
    if overrides:
        ov = overrides if isinstance(overrides, dict) else parse_overrides(overrides)
        d = _merge(d, ov)
    return ExperimentConfig(validate(_merge(DEFAULTS, d)))


def serialize(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=None)


# ---------------------------------------------------------------------------
# validation


def _num(field_, v, positive=False, integer=False, allow_inf=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(field_, f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ValidationError(field_, f"expected an integer, got {v!r}")
    if math.isnan(float(v)) or (not allow_inf and math.isinf(float(v))):
        raise ValidationError(field_, "must be finite")
    if positive and v <= 0:
        raise ValidationError(field_, "must be positive")
    return int(v) if integer else float(v)


def _pair(field_, v):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ValidationError(field_, "expected a pair [a, b]")
    return [_num(field_, v[0]), _num(field_, v[1])]


def _keys(field_, d, allowed):
    if not isinstance(d, dict):
        raise ValidationError(field_, "expected a mapping")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ValidationError(f"{field_}.{extra[0]}" if field_ else extra[0], "unknown key")


def _aniso(field_, d):
    _keys(field_, d, {"type"} | set().union(*_ANISO_KEYS.values()))
    t = d.get("type")
    if t not in _ANISO_KEYS:
        raise ValidationError(f"{field_}.type", f"must be one of {sorted(_ANISO_KEYS)}")
    _keys(field_, d, {"type"} | _ANISO_KEYS[t])
    try:
        return anisotropy_from_dict(d)
    except (ValueError, TypeError) as exc:
        raise ValidationError(field_, str(exc)) from None


def _shape_bbox(shape: dict) -> tuple[float, float, float, float]:
    from .shapes import shape_polygons

    polys = shape_polygons(shape)
    xs = [p[:, 0] for p in polys]
    ys = [p[:, 1] for p in polys]
    return (min(x.min() for x in xs), max(x.max() for x in xs), min(y.min() for y in ys), max(y.max() for y in ys))


def validate(d: dict) -> dict:
    _keys("", d, _TOP_KEYS)
    for k, allowed in _SUB_KEYS.items():
        if k in d and d[k] is not None:
            _keys(k, d[k], allowed)
    mode = d.get("mode")
    if mode not in MODES:
        raise ValidationError("mode", f"must be one of {list(MODES)}")
    algo = d.setdefault("algorithm", ALGORITHMS[mode][0])
    if algo not in ALGORITHMS[mode]:
        raise ValidationError("algorithm", f"must be one of {list(ALGORITHMS[mode])} in mode {mode}")
    if not isinstance(d.get("name"), str):
        raise ValidationError("name", "must be a string")

    g = d["grid"]
    n = _num("grid.n", g.get("n"), positive=True, integer=True)
    if n < 16 or n & (n - 1):
        raise ValidationError("grid.n", "must be a power of two >= 16")
    b = g.get("bounds")
    if not isinstance(b, (list, tuple)) or len(b) != 4:
        raise ValidationError("grid.bounds", "expected [x_min, x_max, y_min, y_max]")
    b = [_num("grid.bounds", v) for v in b]
    if not (b[0] < b[1] and b[2] < b[3]):
        raise ValidationError("grid.bounds", "need x_min < x_max and y_min < y_max")
    if not math.isclose(b[1] - b[0], b[3] - b[2]):
        raise ValidationError("grid.bounds", "domain must be square")
    d["grid"] = {"n": n, "bounds": b}

    k = d["kernel"]
    if k.get("family") not in FAMILIES:
        raise ValidationError("kernel.family", f"must be one of {list(FAMILIES)}")
    if k.get("normalization", "gaussian") not in ("raw", "gaussian"):
        raise ValidationError("kernel.normalization", "must be raw or gaussian")
    if "eps" in k:
        e = _num("kernel.eps", k["eps"], positive=True)
        if e >= 1:
            raise ValidationError("kernel.eps", "must lie in (0, 1)")
    if "n_dirs" in k:
        if _num("kernel.n_dirs", k["n_dirs"], integer=True) < 64:
            raise ValidationError("kernel.n_dirs", "must be at least 64")

    gam = _aniso("anisotropy", d["anisotropy"])
    if d.get("mobility") is not None:
        _aniso("mobility", d["mobility"])
    if k["family"] != "ee" and mode not in ("kernel-info",):
        if not classify(gam).admissible:
            raise ValidationError("anisotropy", "strong anisotropy: gamma + gamma'' changes sign")

    for key in ("dt",):
        if key in d:
            _num(key, d[key], positive=True)
    if "time_scaling" in d:
        ts = d["time_scaling"]
        _num("time_scaling.dt0", ts.get("dt0"), positive=True)
        _num("time_scaling.rel_tau", ts.get("rel_tau", 1e-4), positive=True)
    _num("max_steps", d["max_steps"], positive=True, integer=True)
    di = _num("dump_interval", d["dump_interval"], integer=True)
    if di < 0:
        raise ValidationError("dump_interval", "must be >= 0")
    if d["stop"] not in ("fixed", "stationary"):
        raise ValidationError("stop", "must be fixed or stationary")
    if not isinstance(d["output"], str):
        raise ValidationError("output", "must be a path string")

    if mode == "substrate":
        if "pattern" in d and d["pattern"] is not None:
            from ..obstacle import SubstratePattern

            try:
                segs = [
                    ((_num("pattern", s[0][0], allow_inf=True), _num("pattern", s[0][1], allow_inf=True)), _num("pattern", s[1]))
                    for s in d["pattern"]
                ]
                SubstratePattern(tuple(segs))
            except (TypeError, IndexError, ValueError) as exc:
                raise ValidationError("pattern", str(exc)) from None
        else:
            t = d.get("tensions")
            if not t:
                raise ValidationError("tensions", "substrate runs need gamma_sp and gamma_sv (or a pattern)")
            _num("tensions.gamma_sp", t.get("gamma_sp"))
            _num("tensions.gamma_sv", t.get("gamma_sv"))
        if algo == "alg3" and "time_scaling" not in d:
            raise ValidationError("time_scaling", "alg3 needs time_scaling.dt0")
        if algo == "alg2" and "dt" not in d:
            raise ValidationError("dt", "alg2 needs a time step")
    if mode == "free" and "dt" not in d:
        raise ValidationError("dt", "free runs need a time step")

    if mode in ("free", "substrate"):
        shape = d.get("shape")
        if not isinstance(shape, dict) or shape.get("type") not in SHAPES:
            raise ValidationError("shape.type", f"must be one of {list(SHAPES)}")
        _keys("shape", shape, {"type"} | _SHAPE_KEYS[shape["type"]])
        try:
            x0, x1, y0, y1 = _shape_bbox(shape)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError("shape", f"malformed shape: {exc}") from None
        margin = 1.0
        lo_y = 0.0 if mode == "substrate" else b[2] + margin
        if x0 < b[0] + margin or x1 > b[1] - margin or y0 < lo_y - 1e-12 or y1 > b[3] - margin:
            raise ValidationError("shape", "shape must stay at least one unit inside the domain")

    if mode == "convergence":
        c = d.setdefault("convergence", {})
        fams = c.setdefault("families", ["bbc"])
        for f in fams:
            if f not in ("bbc", "ejz_physical", "ejz_fourier"):
                raise ValidationError("convergence.families", f"{f!r} has no self-similar oracle (bbc/ejz only)")
        c["n_list"] = [_num("convergence.n_list", v, positive=True, integer=True) for v in c.get("n_list", [n])]
        c["dt_list"] = [_num("convergence.dt_list", v, positive=True) for v in c.get("dt_list", [2.0**-k for k in range(3, 9)])]
        for key, dv in (("a", 1.0), ("b", 2.0), ("half_width", 5.0), ("t_end", 0.25)):
            c[key] = _num(f"convergence.{key}", c.get(key, dv), positive=True)
        if c["t_end"] >= 0.5:
            raise ValidationError("convergence.t_end", "must lie before the extinction time 1/2")
    if mode == "kernel-info":
        ki = d.setdefault("kernel_info", {})
        fams = ki.setdefault("families", [k["family"]])
        for f in fams:
            if f not in FAMILIES:
                raise ValidationError("kernel_info.families", f"unknown family {f!r}")
        ki["directions"] = _num("kernel_info.directions", ki.get("directions", 32), positive=True, integer=True)
    return d
