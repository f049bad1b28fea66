"""Named reproductions of the reference experiments at desk scale."""

from __future__ import annotations

import copy
import math

from .config import ExperimentConfig, parse_config
from .runner import ExperimentReport, run_experiment

FOUR_FOLD = {"type": "cosine", "modes": [[0.05, 4, 0.0]]}
TILTED = {"type": "cosine", "modes": [[0.05, 4, 8.0]]}
TWO_FOLD = {"type": "cosine", "modes": [[0.3, 2, math.pi]]}
SCALE_NOTE = "desk scale: the reference runs used n = 2^13 to 2^14"

PRESETS: dict[str, dict] = {
    "ellipse-convergence": {
        "name": "ellipse-convergence",
        "mode": "convergence",
        "grid": {"n": 512},
        "kernel": {"family": "bbc"},
        "anisotropy": {"type": "elliptic", "a": 1.0, "b": 2.0},
        "convergence": {
            "families": ["bbc", "ejz_physical", "ejz_fourier"],
            "dt_list": [2.0**-k for k in range(3, 10)],
            "a": 1.0,
            "b": 2.0,
            "half_width": 5.0,
            "t_end": 0.25,
        },
    },
    "crystalline-square": {
        "name": "crystalline-square",
        "mode": "free",
        "algorithm": "area-preserving",
        "grid": {"n": 1024, "bounds": [-2.5, 2.5, -2.5, 2.5]},
        "kernel": {"family": "ee", "eps": 0.05, "normalization": "gaussian"},
        "anisotropy": {"type": "crystalline", "eps": 0.01},
        "shape": {"type": "circle", "center": [0.0, 0.0], "radius": 1.0},
        # small steps pin the facets before the corners form
        "dt": 2.0**-4,
        "stop": "stationary",
        "max_steps": 1500,
        "dump_interval": 50,
    },
    "s-shape": {
        "name": "s-shape",
        "mode": "free",
        "algorithm": "threshold",
        "grid": {"n": 512, "bounds": [-3.0, 3.0, -3.0, 3.0]},
        "kernel": {"family": "bbc"},
        "anisotropy": FOUR_FOLD,
        "shape": {"type": "s-shape"},
        "dt": 2.0**-9,
        "max_steps": 120,
        "dump_interval": 20,
        "notes": "approximate S polygon; qualitative demo without a reference solution",
    },
    "particle-on-substrate": {
        "name": "particle-on-substrate",
        "mode": "substrate",
        "algorithm": "alg2",
        "grid": {"n": 512},
        "kernel": {"family": "bbc"},
        "anisotropy": FOUR_FOLD,
        "tensions": {"gamma_sp": 1.5, "gamma_sv": 1.0},
        "shape": {"type": "rectangle", "x": [-1.25, 1.25], "y": [0.0, 2.5]},
        "dt": 2.0**-5,
        "stop": "stationary",
        "max_steps": 3000,
        "dump_interval": 50,
    },
    "tilted-contact": {
        "name": "tilted-contact",
        "mode": "substrate",
        "algorithm": "alg3",
        "grid": {"n": 512},
        "kernel": {"family": "bbc"},
        "anisotropy": TILTED,
        "tensions": {"gamma_sp": 1.0, "gamma_sv": 1.1},
        "shape": {"type": "rectangle", "x": [-1.25, 1.25], "y": [0.0, 2.5]},
        "time_scaling": {"dt0": 0.25, "rel_tau": 1e-4},
        "max_steps": 3000,
        "dump_interval": 50,
    },
    "split": {
        "name": "split",
        "mode": "substrate",
        "algorithm": "alg2",
        "grid": {"n": 512},
        "kernel": {"family": "bbc"},
        "anisotropy": TWO_FOLD,
        "pattern": [[[-math.inf, -0.5], 0.0], [[-0.5, 0.5], 2.0], [[0.5, math.inf], 0.0]],
        "shape": {"type": "rectangle", "x": [-2.0, 2.0], "y": [0.0, 0.2]},
        "dt": 2.0**-8,
        "stop": "fixed",
        "max_steps": 500,
        "dump_interval": 25,
    },
    "merge": {
        "name": "merge",
        "mode": "substrate",
        "algorithm": "alg2",
        "grid": {"n": 512},
        "kernel": {"family": "bbc"},
        "anisotropy": TWO_FOLD,
        "pattern": [[[-math.inf, -0.5], 0.0], [[-0.5, 0.5], -0.1], [[0.5, math.inf], 0.0]],
        "shape": {"type": "triangle-pair", "gap": 0.4, "width": 1.0, "height": 1.0},
        "dt": 2.0**-8,
        "stop": "fixed",
        "max_steps": 500,
        "dump_interval": 25,
    },
    "kernel-info": {
        "name": "kernel-info",
        "mode": "kernel-info",
        "grid": {"n": 512},
        "kernel": {"family": "gaussian", "eps": 0.1, "normalization": "raw"},
        "anisotropy": {"type": "elliptic", "a": 2.0, "b": 1.0},
        "kernel_info": {"families": ["gaussian", "bbc", "ee", "ejz_physical", "ejz_fourier"], "directions": 32},
    },
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset_config(name: str, overrides=None) -> ExperimentConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {preset_names()}")
    d = copy.deepcopy(PRESETS[name])
    d.setdefault("notes", SCALE_NOTE)
    return parse_config(d, overrides)


def _angle_gap(summary: dict) -> float:
    return max(
        abs(summary["contact_left_deg"] - summary["young_left_deg"]),
        abs(summary["contact_right_deg"] - summary["young_right_deg"]),
    )


def run_preset(name: str, overrides=None) -> ExperimentReport:
    """Run a preset; the tilted preset also runs the fixed-step comparison."""
    cfg = preset_config(name, overrides)
    rep = run_experiment(cfg)
    if name == "tilted-contact" and "contact_left_deg" in rep.summary:
        d = cfg.to_dict()
        d.pop("time_scaling")
        d.update(algorithm="alg2", dt=d.get("dt", cfg["time_scaling"]["dt0"]), stop="stationary", dump_interval=0)
        d["dt"] = cfg["time_scaling"]["dt0"]
        ref = run_experiment(parse_config(d))
        s = rep.summary
        for k in ("contact_left_deg", "contact_right_deg", "winterbottom_error", "steps"):
            if k in ref.summary:
                s[f"alg2_{k}"] = ref.summary[k]
        if "contact_left_deg" in ref.summary:
            s["alg3_angle_gap_deg"] = _angle_gap(s)
            s["alg2_angle_gap_deg"] = _angle_gap({**ref.summary, **{k: s[k] for k in ("young_left_deg", "young_right_deg")}})
    return rep
