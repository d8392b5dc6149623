import json
import os

import numpy as np
import pytest

from suspensia.cli import (
    ConfigError,
    build_geometry,
    main,
    run_experiment,
    validate_config,
)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh)
    return str(path)


LATTICE = {"type": "lattice", "box_size": 4.0, "spacing": 4.0,
           "disk_radius": 1.0, "delta": 0.25}


def test_validate_config_rejects_unknowns():
    with pytest.raises(ConfigError):
        validate_config({"kind": "solve-cell", "geometry": LATTICE,
                         "resolution": 32, "bogus": 1})
    with pytest.raises(ConfigError):
        validate_config({"kind": "gen-geometry",
                         "geometry": dict(LATTICE, color="red")})
    with pytest.raises(ConfigError):
        validate_config({"kind": "warp-drive"})
    with pytest.raises(ConfigError):
        validate_config({"kind": "solve-cell", "geometry": LATTICE})  # no N
    with pytest.raises(ConfigError):
        validate_config({"kind": "gen-geometry",
                         "geometry": {"type": "matern", "box_size": 8.0}})


def test_validate_config_fills_defaults():
    cfg = validate_config({"kind": "solve-cell", "geometry": LATTICE,
                           "resolution": 32})
    assert cfg["mu_stiff"] == 1e4
    assert cfg["rel_tolerance"] == 1e-8
    assert cfg["seed"] == 0
    # ints are accepted where floats are expected
    cfg = validate_config({"kind": "solve-cell", "geometry": LATTICE,
                           "resolution": 32, "mu_stiff": 1000})
    assert cfg["mu_stiff"] == 1000.0
    with pytest.raises(ConfigError):
        validate_config({"kind": "solve-cell", "geometry": LATTICE,
                         "resolution": "32"})


def test_build_geometry_variants(tmp_path):
    geo = build_geometry(LATTICE)
    assert len(geo) == 1
    mat = build_geometry({"type": "matern", "box_size": 16.0,
                          "intensity": 0.04, "disk_radius": 1.0,
                          "delta": 0.25}, seed=2)
    assert mat.periodic


def test_main_exit_codes(tmp_path):
    cfg = write_json(tmp_path / "g.json", {"geometry": LATTICE})
    out = str(tmp_path / "out")
    assert main(["gen-geometry", "--config", cfg, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "geometry.json"))
    assert os.path.exists(os.path.join(out, "manifest.json"))
    assert os.path.exists(os.path.join(out, "config.json"))

    # unknown key -> validation failure
    bad = write_json(tmp_path / "bad.json",
                     {"geometry": LATTICE, "nope": True})
    assert main(["gen-geometry", "--config", bad, "--out", out]) == 2
    # kind mismatch between config and subcommand
    mismatched = write_json(tmp_path / "m.json",
                            {"kind": "solve-cell", "geometry": LATTICE,
                             "resolution": 32})
    assert main(["gen-geometry", "--config", mismatched, "--out", out]) == 2
    # missing config file
    assert main(["gen-geometry", "--config", str(tmp_path / "none.json"),
                 "--out", out]) == 2
    # no output dir anywhere
    os.environ.pop("SUSPENSIA_OUT", None)
    assert main(["gen-geometry", "--config", cfg]) == 2


def test_env_var_output_dir(tmp_path, monkeypatch):
    cfg = write_json(tmp_path / "g.json", {"geometry": LATTICE})
    out = str(tmp_path / "envout")
    monkeypatch.setenv("SUSPENSIA_OUT", out)
    assert main(["gen-geometry", "--config", cfg]) == 0
    assert os.path.exists(os.path.join(out, "geometry.json"))


def test_overrides_and_flag_precedence(tmp_path):
    cfg = write_json(tmp_path / "g.json",
                     {"geometry": {"type": "matern", "box_size": 8.0,
                                   "intensity": 0.05, "disk_radius": 1.0,
                                   "delta": 0.25},
                      "seed": 1})
    out1 = str(tmp_path / "o1")
    out2 = str(tmp_path / "o2")
    out3 = str(tmp_path / "o3")
    assert main(["gen-geometry", "--config", cfg, "--out", out1]) == 0
    # key=value override beats the file
    assert main(["gen-geometry", "--config", cfg, "--out", out2,
                 "seed=2"]) == 0
    # the dedicated flag beats both
    assert main(["gen-geometry", "--config", cfg, "--out", out3,
                 "seed=2", "--seed", "1"]) == 0

    def centers(d):
        with open(os.path.join(d, "geometry.json")) as fh:
            return json.load(fh)["centers"]

    assert centers(out1) != centers(out2)
    assert centers(out1) == centers(out3)


def test_dotted_override(tmp_path):
    cfg = write_json(tmp_path / "g.json", {"geometry": LATTICE})
    out = str(tmp_path / "o")
    assert main(["gen-geometry", "--config", cfg, "--out", out,
                 "geometry.disk_radius=0.5"]) == 0
    with open(os.path.join(out, "config.json")) as fh:
        stored = json.load(fh)
    assert stored["geometry"]["disk_radius"] == 0.5


def test_solve_cell_run_and_manifest(tmp_path):
    cfg = {"kind": "solve-cell", "geometry": LATTICE, "resolution": 16,
           "mu_stiff": 1000.0}
    out = str(tmp_path / "cell")
    manifest = run_experiment(cfg, out=out)
    assert manifest["kind"] == "solve-cell"
    assert "numpy" in manifest["versions"]
    assert manifest["wall_time_s"] > 0
    assert os.path.isdir(os.path.join(out, "correctors"))
    with open(os.path.join(out, "effective.json")) as fh:
        eff = json.load(fh)
    B = np.asarray(eff["B_bar"])
    assert B[0, 0] > 1.0 and B[1, 1] > 1.0

    # reruns reproduce the numeric artifacts byte for byte
    out2 = str(tmp_path / "cell2")
    run_experiment(cfg, out=out2)
    for name in sorted(os.listdir(os.path.join(out, "correctors"))):
        a = open(os.path.join(out, "correctors", name), "rb").read()
        b = open(os.path.join(out2, "correctors", name), "rb").read()
        assert a == b, name


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    cfg = write_json(tmp_path / "c.json",
                     {"kind": "solve-cell", "geometry": LATTICE,
                      "resolution": 16, "max_iterations": 1})
    out = str(tmp_path / "o")
    assert main(["solve-cell", "--config", cfg, "--out", out]) == 3
