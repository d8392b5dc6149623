"""Command line front end.

Every run takes a JSON config, validates it against a fixed schema (unknown
keys are rejected), executes one experiment kind and leaves a self-contained
output directory: a copy of the effective config, the numeric artifacts, and
a manifest with the config hash, package versions and wall time.

Exit codes: 0 success, 2 config/validation failure, 3 solver failure.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np
import scipy

from . import __version__
from .corrector import CorrectorSet, geometry_hash
from .effective import EffectiveTensors
from .fields import PERIODIC, StaggeredGrid, save_field
from .geometry import (
    GeometryError,
    gen_matern_hardcore,
    gen_periodic_lattice,
    load_geometry,
    save_geometry,
    validate_hardcore,
)
from .homog import (
    HomogenizationCase,
    compact_support_case,
    default_forcing,
    run_rate_study,
    solve_heterogeneous,
    solve_homogenized,
    two_scale_error,
)
from .regularity import RegularityProbe, free_problem
from .solver import PreconditionError, SolverConfig, SolverError
from .stats import EnsembleSpec, StatsReport


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config schema

_GEOMETRY_SCHEMA = {
    "type": str,          # "lattice" | "matern" | "file"
    "box_size": float,
    "spacing": float,
    "disk_radius": float,
    "delta": float,
    "intensity": float,
    "path": str,
}

# per-kind allowed keys: name -> (type, default); _REQUIRED means no default
_REQUIRED = object()

_SOLVER_KEYS = {
    "mu_stiff": (float, 1e4),
    "rel_tolerance": (float, 1e-8),
    "max_iterations": (int, 50000),
}

_SCHEMAS = {
    "gen-geometry": {
        "geometry": (dict, _REQUIRED),
        "seed": (int, 0),
    },
    "solve-cell": {
        "geometry": (dict, _REQUIRED),
        "resolution": (int, _REQUIRED),
        "seed": (int, 0),
        **_SOLVER_KEYS,
    },
    "effective": {
        "correctors": (str, _REQUIRED),
    },
    "homogenize": {
        "geometry": (dict, _REQUIRED),
        "epsilon": (float, _REQUIRED),
        "resolution_factor": (int, 16),
        "compact_support": (bool, False),
        "seed": (int, 0),
        **_SOLVER_KEYS,
    },
    "rate-study": {
        "geometry": (dict, _REQUIRED),
        "epsilon_list": (list, _REQUIRED),
        "resolution_factor": (int, 16),
        "compact_support": (bool, False),
        "seed": (int, 0),
        **_SOLVER_KEYS,
    },
    "regularity": {
        "geometry": (dict, _REQUIRED),
        "periods": (int, 4),
        "cell_resolution": (int, _REQUIRED),
        "C0": (float, 16.0),
        "seed": (int, 0),
        **_SOLVER_KEYS,
    },
    "stats": {
        "intensity": (float, _REQUIRED),
        "disk_radius": (float, 1.0),
        "delta": (float, 0.25),
        "L_list": (list, _REQUIRED),
        "samples": (int, 16),
        "cells_per_unit": (int, 2),
        "experiments": (list, ["variance", "growth", "rstar"]),
        "C0": (float, 16.0),
        "seed": (int, 0),
        **_SOLVER_KEYS,
    },
}


def _coerce(value, typ, key):
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if not isinstance(value, typ) or (typ is not bool and isinstance(value, bool)):
        raise ConfigError(f"config key {key!r} must be {typ.__name__}")
    return value


def validate_config(cfg):
    """Schema check with unknown-key rejection; returns the filled config."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = cfg.get("kind")
    if kind not in _SCHEMAS:
        raise ConfigError(
            f"config needs a 'kind' among {sorted(_SCHEMAS)}; got {kind!r}"
        )
    schema = _SCHEMAS[kind]
    out = {"kind": kind}
    for key in cfg:
        if key != "kind" and key not in schema:
            raise ConfigError(f"unknown config key {key!r} for kind {kind!r}")
    for key, (typ, default) in schema.items():
        if key in cfg:
            out[key] = _coerce(cfg[key], typ, key)
        elif default is _REQUIRED:
            raise ConfigError(f"config kind {kind!r} requires key {key!r}")
        else:
            out[key] = default
    if "geometry" in out:
        geo = out["geometry"]
        for key, typ in geo.items():
            if key not in _GEOMETRY_SCHEMA:
                raise ConfigError(f"unknown geometry key {key!r}")
        gtype = geo.get("type")
        if gtype not in ("lattice", "matern", "file"):
            raise ConfigError("geometry.type must be lattice, matern or file")
        needed = {
            "lattice": ["box_size", "spacing", "disk_radius", "delta"],
            "matern": ["box_size", "intensity", "disk_radius", "delta"],
            "file": ["path"],
        }[gtype]
        for key in needed:
            if key not in geo:
                raise ConfigError(f"geometry.type {gtype!r} requires geometry.{key}")
    return out


def _solver_config(cfg):
    return SolverConfig(
        rel_tolerance=cfg["rel_tolerance"],
        max_iterations=cfg["max_iterations"],
        mu_stiff=cfg["mu_stiff"],
    )


def build_geometry(geo_cfg, seed=0):
    gtype = geo_cfg["type"]
    if gtype == "file":
        return load_geometry(geo_cfg["path"])
    if gtype == "lattice":
        return gen_periodic_lattice(
            geo_cfg["box_size"], geo_cfg["spacing"],
            geo_cfg["disk_radius"], geo_cfg["delta"],
        )
    return gen_matern_hardcore(
        geo_cfg["box_size"], geo_cfg["intensity"],
        geo_cfg["disk_radius"], geo_cfg["delta"], seed,
    )


# ---------------------------------------------------------------------------
# runners: config -> artifacts in outdir, return a summary dict


def _run_gen_geometry(cfg, outdir):
    geo = build_geometry(cfg["geometry"], cfg["seed"])
    report = validate_hardcore(geo)
    if not report.passed:
        raise GeometryError(
            f"{len(report.violations)} hardcore violations in generated set"
        )
    save_geometry(os.path.join(outdir, "geometry.json"), geo)
    with open(os.path.join(outdir, "hardcore.json"), "w") as fh:
        json.dump({"passed": report.passed,
                   "violations": report.violations,
                   "inclusions": len(geo)}, fh, indent=1, sort_keys=True)
    return {"inclusions": len(geo), "geometry_hash": geometry_hash(geo),
            "artifacts": ["geometry.json", "hardcore.json"]}


def _run_solve_cell(cfg, outdir):
    geo = build_geometry(cfg["geometry"], cfg["seed"])
    grid = StaggeredGrid(cfg["resolution"], geo.box_size, PERIODIC)
    cs = CorrectorSet.compute(grid, geo, _solver_config(cfg))
    cs.save(os.path.join(outdir, "correctors"))
    eff = EffectiveTensors(cs)
    eff.save(os.path.join(outdir, "effective.json"))
    return {"lambda": cs.lam, "B_bar": eff.B_bar.tolist(),
            "warnings": eff.warnings,
            "artifacts": ["correctors", "effective.json"]}


def _run_effective(cfg, outdir):
    cs = CorrectorSet.load(cfg["correctors"])
    eff = EffectiveTensors(cs)
    eff.save(os.path.join(outdir, "effective.json"))
    return {"lambda": cs.lam, "B_bar": eff.B_bar.tolist(),
            "warnings": eff.warnings, "artifacts": ["effective.json"]}


def _cell_correctors(cfg, resolution_factor, solver_cfg):
    """Corrector set on the cell grid matching the macro resolution."""
    geo = build_geometry(cfg["geometry"], cfg["seed"])
    n_cell = geo.box_size * resolution_factor
    n_int = int(round(n_cell))
    if abs(n_cell - n_int) > 1e-9:
        raise ConfigError(
            "resolution_factor times the cell box size must be an integer"
        )
    grid = StaggeredGrid(n_int, geo.box_size, PERIODIC)
    return CorrectorSet.compute(grid, geo, solver_cfg)


def _make_case(cfg, eps_list, solver_cfg):
    cs = _cell_correctors(cfg, cfg["resolution_factor"], solver_cfg)
    eff = EffectiveTensors(cs)
    if cfg["compact_support"]:
        forcing, _u_star = compact_support_case(eff.B_bar, eff.lam)
    else:
        forcing = default_forcing()
    case = HomogenizationCase(
        cell_geometry=cs.geometry,
        forcing=forcing,
        epsilon_list=eps_list,
        compact_support=cfg["compact_support"],
        resolution_factor=cfg["resolution_factor"],
        config=solver_cfg,
    )
    return case, cs, eff


def _run_homogenize(cfg, outdir):
    solver_cfg = _solver_config(cfg)
    eps = cfg["epsilon"]
    case, cs, eff = _make_case(cfg, [eps], solver_cfg)
    grid = case.grid_for(eps)
    u_eps, p_eps, chi, report = solve_heterogeneous(case, eps, grid)
    u_bar, p_bar = solve_homogenized(grid, eff.B_bar, eff.lam, case.forcing,
                                     solver_cfg)
    h1, perr = two_scale_error(u_eps, p_eps, u_bar, p_bar, cs, eps,
                               b_bar=eff.b_bar, chi=chi)
    save_field(os.path.join(outdir, "u_eps.fld"),
               np.stack([u_eps.ux[:-1, :], u_eps.uy[:, :-1]], axis=-1))
    save_field(os.path.join(outdir, "p_eps.fld"), p_eps.values)
    save_field(os.path.join(outdir, "u_bar.fld"),
               np.stack([u_bar.ux[:-1, :], u_bar.uy[:, :-1]], axis=-1))
    eff.save(os.path.join(outdir, "effective.json"))
    record = {"epsilon": eps, "grid_n": grid.n, "err_H1": h1,
              "err_pressure": perr,
              "solver_residual": report.momentum_residual,
              "lambda": eff.lam}
    with open(os.path.join(outdir, "record.json"), "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
    return dict(record, artifacts=["u_eps.fld", "p_eps.fld", "u_bar.fld",
                                   "effective.json", "record.json"])


def _run_rate_study(cfg, outdir):
    solver_cfg = _solver_config(cfg)
    eps_list = sorted(float(e) for e in cfg["epsilon_list"])
    if len(eps_list) < 3:
        raise ConfigError("rate-study needs at least 3 epsilon values")
    case, cs, eff = _make_case(cfg, eps_list, solver_cfg)
    report = run_rate_study(case, lambda eps: cs, eff)
    report.to_csv(os.path.join(outdir, "rate.csv"))
    eff.save(os.path.join(outdir, "effective.json"))
    summary = report.summary()
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return dict(summary, artifacts=["rate.csv", "summary.json",
                                    "effective.json"])


def _run_regularity(cfg, outdir):
    solver_cfg = _solver_config(cfg)
    geo = build_geometry(cfg["geometry"], cfg["seed"])
    cell_grid = StaggeredGrid(cfg["cell_resolution"], geo.box_size, PERIODIC)
    cs = CorrectorSet.compute(cell_grid, geo, solver_cfg)
    # seed-dependent affine boundary data, trace free plus a rotation
    rng = np.random.default_rng(cfg["seed"])
    a, b, w = rng.uniform(-1.0, 1.0, 3)
    A = np.array([[a, b + w], [b - w, -a]])
    bnd = (lambda x, y: A[0, 0] * x + A[0, 1] * y,
           lambda x, y: A[1, 0] * x + A[1, 1] * y)
    u, p, chi, grid = free_problem(geo, cfg["periods"], cfg["cell_resolution"],
                                   bnd, solver_cfg)
    center = (grid.box_size / 2, grid.box_size / 2)
    radii, r = [], max(1.0, 4 * grid.h)
    while r <= grid.box_size / 2 + 1e-12:
        radii.append(r)
        r *= 2
    probe = RegularityProbe(u, cs, center, radii, C0=cfg["C0"])
    probe.to_csv(os.path.join(outdir, "probe.csv"))
    record = {"r_star": probe.mr.r_star, "censored": probe.mr.censored,
              "interval": list(probe.mr.interval),
              "boundary_matrix": A.tolist(), "grid_n": grid.n}
    with open(os.path.join(outdir, "record.json"), "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
    return dict(record, artifacts=["probe.csv", "record.json"])


def _run_stats(cfg, outdir):
    spec = EnsembleSpec(
        intensity=cfg["intensity"],
        disk_radius=cfg["disk_radius"],
        delta=cfg["delta"],
        L_list=[float(L) for L in cfg["L_list"]],
        samples=cfg["samples"],
        base_seed=cfg["seed"],
        cells_per_unit=cfg["cells_per_unit"],
        config=_solver_config(cfg),
    )
    experiments = set(cfg["experiments"])
    unknown = experiments - {"variance", "growth", "rstar"}
    if unknown:
        raise ConfigError(f"unknown stats experiments {sorted(unknown)}")
    E = np.array([[1.0, 0.0], [0.0, -1.0]]) / np.sqrt(2.0)
    report = StatsReport(spec, E,
                         run_variance="variance" in experiments,
                         run_growth="growth" in experiments,
                         run_rstar="rstar" in experiments,
                         C0=cfg["C0"])
    report.to_csv(os.path.join(outdir, "stats"))
    with open(os.path.join(outdir, "stats.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
    return {"experiments": sorted(experiments), "artifacts": ["stats.json"]}


_RUNNERS = {
    "gen-geometry": _run_gen_geometry,
    "solve-cell": _run_solve_cell,
    "effective": _run_effective,
    "homogenize": _run_homogenize,
    "rate-study": _run_rate_study,
    "regularity": _run_regularity,
    "stats": _run_stats,
}


# ---------------------------------------------------------------------------
# driver


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_override(cfg, key, value):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} crosses a non-object")
    node[parts[-1]] = value


def _config_hash(cfg):
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()
    ).hexdigest()


def run_experiment(config, overrides=None, out=None, seed=None,
                   threads=None, resolution=None):
    """Validate and execute one config (dict or JSON path); returns the manifest."""
    overrides = overrides or []
    if isinstance(config, dict):
        cfg = dict(config)
    else:
        try:
            with open(config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config}: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key, value in overrides:
        _apply_override(cfg, key, value)
    # dedicated flags take precedence over both file and key=value overrides
    if seed is not None:
        cfg["seed"] = seed
    if resolution is not None:
        cfg["resolution"] = resolution
    cfg = validate_config(cfg)

    outdir = out or os.environ.get("SUSPENSIA_OUT")
    if not outdir:
        raise ConfigError("no output directory: pass --out or set SUSPENSIA_OUT")
    os.makedirs(outdir, exist_ok=True)

    if threads is not None:
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)

    with open(os.path.join(outdir, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=1, sort_keys=True)

    start = time.time()
    summary = _RUNNERS[cfg["kind"]](cfg, outdir)
    manifest = {
        "kind": cfg["kind"],
        "config_hash": _config_hash(cfg),
        "versions": {
            "suspensia": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "threads": threads,
        "wall_time_s": time.time() - start,
        "summary": summary,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def build_parser():
    parser = argparse.ArgumentParser(
        prog="suspensia",
        description="2D rigid-suspension Stokes laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in _SCHEMAS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory "
                       "(falls back to $SUSPENSIA_OUT)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--resolution", type=int, default=None)
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="config overrides, dotted keys allowed")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = [_parse_override(o) for o in args.overrides]
        with open(args.config) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        raw.setdefault("kind", args.command)
        if raw["kind"] != args.command:
            raise ConfigError(
                f"config kind {raw['kind']!r} does not match "
                f"subcommand {args.command!r}"
            )
        manifest = run_experiment(
            raw, overrides, out=args.out, seed=args.seed,
            threads=args.threads, resolution=args.resolution,
        )
    except (ConfigError, GeometryError, PreconditionError, ValueError,
            json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(manifest["summary"], sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
