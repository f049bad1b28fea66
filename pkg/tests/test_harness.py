import math

import numpy as np
import pytest
import yaml

from anithresh.errors import ParseError, ValidationError
from anithresh.harness import (
    ExperimentReport,
    emit_report,
    parse_config,
    preset_config,
    preset_names,
    run_experiment,
    run_preset,
    serialize,
)
from anithresh.harness.cli import main, output_dir
from anithresh.harness.shapes import load_s_shape, shape_indicator, triangle_pair
from anithresh.grid import Grid

FREE = {
    "name": "tiny",
    "mode": "free",
    "grid": {"n": 64},
    "kernel": {"family": "bbc"},
    "anisotropy": {"type": "elliptic", "a": 1.0, "b": 2.0},
    "shape": {"type": "circle", "center": [0.0, 0.0], "radius": 2.0},
    "dt": 0.02,
    "max_steps": 10,
    "dump_interval": 3,
}

SUBSTRATE = {
    "name": "tiny-substrate",
    "mode": "substrate",
    "algorithm": "alg2",
    "grid": {"n": 64},
    "kernel": {"family": "bbc"},
    "anisotropy": {"type": "cosine", "modes": [[0.05, 4, 0.0]]},
    "tensions": {"gamma_sp": 1.5, "gamma_sv": 1.0},
    "shape": {"type": "rectangle", "x": [-1.25, 1.25], "y": [0.0, 2.5]},
    "dt": 0.05,
    "max_steps": 8,
    "dump_interval": 4,
}


def write(tmp_path, d, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(d))
    return p


# ---------------------------------------------------------------------------
# configuration


def test_round_trip_idempotent():
    for d in (FREE, SUBSTRATE):
        once = serialize(parse_config(d))
        assert serialize(parse_config(once)) == once
    for name in preset_names():
        once = serialize(preset_config(name))
        assert serialize(parse_config(once)) == once


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError) as info:
        parse_config({**FREE, "colour": "red"})
    assert "colour" in str(info.value)
    with pytest.raises(ValidationError) as info:
        parse_config({**FREE, "grid": {"n": 64, "size": 3}})
    assert "grid.size" in str(info.value)
    with pytest.raises(ValidationError):
        parse_config({**FREE, "shape": {"type": "circle", "radius": 1.0, "sides": 4}})


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"grid": {"n": 100}}, "grid.n"),
        ({"dt": -1.0}, "dt"),
        ({"dt": float("nan")}, "dt"),
        ({"mode": "liquid"}, "mode"),
        ({"kernel": {"family": "heat"}}, "kernel.family"),
        ({"shape": {"type": "circle", "center": [0.0, 0.0], "radius": 6.0}}, "shape"),
        ({"anisotropy": {"type": "cosine", "modes": [[0.25, 4, 0.0]]}}, "anisotropy"),
        ({"algorithm": "alg3"}, "algorithm"),
    ],
)
def test_validation_errors(patch, field):
    with pytest.raises(ValidationError) as info:
        parse_config({**FREE, **patch})
    assert info.value.field == field


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        parse_config("a: [1, 2\n")
    with pytest.raises(ParseError):
        parse_config(tmp_path / "missing.yaml")
    with pytest.raises(ParseError):
        parse_config(FREE, ["grid.n"])


def test_overrides_win(tmp_path):
    cfg = parse_config(write(tmp_path, FREE), ["grid.n=128", "anisotropy.b=3.0"])
    assert cfg["grid"]["n"] == 128 and cfg["anisotropy"] == {"type": "elliptic", "a": 1.0, "b": 3.0}
    # a new type replaces the whole section
    cfg = parse_config(FREE, {"anisotropy": {"type": "constant", "c": 2.0}})
    assert cfg["anisotropy"] == {"type": "constant", "c": 2.0}


def test_substrate_requirements():
    d = dict(SUBSTRATE)
    d.pop("tensions")
    with pytest.raises(ValidationError):
        parse_config(d)
    d = {**SUBSTRATE, "pattern": [[[-math.inf, 0.0], 1.0], [[0.0, math.inf], 0.0]]}
    d.pop("tensions")
    assert parse_config(d)["pattern"][0][0][0] == -math.inf
    with pytest.raises(ValidationError):
        parse_config({**d, "pattern": [[[-1.0, 0.0], 1.0]]})
    with pytest.raises(ValidationError):
        parse_config({**SUBSTRATE, "shape": {"type": "rectangle", "x": [-1, 1], "y": [-0.5, 1]}})


def test_presets_parse():
    assert set(preset_names()) == {
        "ellipse-convergence", "crystalline-square", "s-shape", "particle-on-substrate",
        "tilted-contact", "split", "merge", "kernel-info",
    }
    tilted = preset_config("tilted-contact")
    assert tilted["anisotropy"]["modes"] == [[0.05, 4, 8.0]]
    assert tilted["tensions"] == {"gamma_sp": 1.0, "gamma_sv": 1.1}
    assert tilted["algorithm"] == "alg3"
    conv = preset_config("ellipse-convergence")
    assert conv.mode == "convergence" and "bbc" in conv["convergence"]["families"]
    with pytest.raises(KeyError):
        preset_config("nope")


# ---------------------------------------------------------------------------
# shapes


def test_shapes():
    g = Grid(128)
    tri = triangle_pair(0.4, 1.0, 1.0)
    assert len(tri) == 2
    assert min(p[:, 0].min() for p in tri if p[:, 0].min() > 0) == pytest.approx(0.2)
    ind = shape_indicator(g, {"type": "triangle-pair", "gap": 0.4, "width": 1.0, "height": 1.0})
    # boundary cells count as inside: at most one cell layer along the perimeter
    perimeter = 2 * (2 + math.sqrt(2))
    assert abs(ind.sum() * g.cell_area - 1.0) <= perimeter * g.dx
    s = load_s_shape()
    assert s.ndim == 2 and s.shape[1] == 2 and len(s) > 10


# ---------------------------------------------------------------------------
# runs and reports


def test_snapshot_count_and_files(tmp_path):
    rep = run_experiment(parse_config(FREE))
    # steps 0, 3, 6, 9 and the final step 10
    assert [s.step for s in rep.snapshots] == [0, 3, 6, 9, 10]
    assert len(rep.snapshots) == math.ceil(10 / 3) + 1
    files = emit_report(rep, tmp_path)
    names = {p.relative_to(tmp_path).as_posix() for p in files}
    assert {"report.csv", "energy.csv", "events.jsonl", "timing.json", "config.yaml"} <= names
    assert len(list((tmp_path / "snapshots").glob("*.pgm"))) == 5
    assert len(list((tmp_path / "interfaces").glob("*.csv"))) == 5
    assert (tmp_path / "energy.csv").read_text().splitlines()[0] == "step,time,dt,energy"


def test_empty_report_headers_only(tmp_path):
    emit_report(ExperimentReport("empty", "free"), tmp_path)
    assert (tmp_path / "energy.csv").read_text() == "step,time,dt,energy\n"
    assert (tmp_path / "events.jsonl").read_text() == ""
    assert not (tmp_path / "snapshots").exists()


def test_emit_deterministic(tmp_path):
    for i in (1, 2):
        emit_report(run_experiment(parse_config(SUBSTRATE)), tmp_path / str(i))
    for name in ("report.csv", "energy.csv", "events.jsonl", "config.yaml"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()
    a = sorted((tmp_path / "1" / "interfaces").iterdir())
    b = sorted((tmp_path / "2" / "interfaces").iterdir())
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_substrate_summary():
    rep = run_experiment(parse_config(SUBSTRATE))
    s = rep.summary
    assert s["counts_conserved"] and s["final_count"] == s["target_count"]
    assert s["young_left_deg"] == pytest.approx(-s["young_right_deg"])
    assert len(rep.energy) == 9


def test_kernel_info_gaussian_constant():
    rep = run_preset("kernel-info", ["kernel_info.families=[gaussian]"])
    header, rows = rep.tables["kernel_gaussian"]
    col = header.index("gamma_K")
    vals = np.array([r[col] for r in rows])
    assert np.max(np.abs(vals - 1 / math.sqrt(math.pi))) < 1e-4


# ---------------------------------------------------------------------------
# command line


def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, FREE)
    assert main(["simulate", str(good), "--output", str(tmp_path / "out"), "--quiet"]) == 0
    assert (tmp_path / "out" / "report.csv").exists()
    # configuration problems
    assert main(["simulate", str(write(tmp_path, {**FREE, "bogus": 1}, "bad.yaml"))]) == 2
    assert main(["simulate", str(tmp_path / "missing.yaml")]) == 2
    assert main(["converge", str(good)]) == 2
    assert main(["preset", "nope"]) == 2
    assert main(["simulate", str(good), "--set", "grid.n=48"]) == 2
    # failures during the run: the kernel cannot be assembled for this anisotropy
    strong = {**FREE, "kernel": {"family": "ee", "eps": 0.1}, "anisotropy": {"type": "cosine", "modes": [[0.1, 4, 0.0]]}}
    assert main(["simulate", str(write(tmp_path, strong, "strong.yaml")), "--output", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert "configuration error" in err and "NegativeWeight" in err


def test_cli_presets_and_env_root(tmp_path, monkeypatch, capsys):
    assert main(["presets"]) == 0
    assert "tilted-contact" in capsys.readouterr().out
    monkeypatch.setenv("ANITHRESH_OUTPUT_ROOT", str(tmp_path))
    assert output_dir("abc", None) == tmp_path / "abc"
    assert output_dir("abc", "elsewhere").as_posix() == "elsewhere"
    cfg = write(tmp_path, {"name": "ki", "mode": "kernel-info", "grid": {"n": 64}, "kernel": {"family": "gaussian"}})
    assert main(["kernel-info", str(cfg), "--quiet"]) == 0
    assert (tmp_path / "ki" / "kernel_gaussian.csv").exists()
