"""Configuration-driven command line: classification checks, single solves,
convergence studies, and stability sweeps.

Configs are INI files with typed keys; unknown sections or keys are rejected
so a misspelled parameter never silently falls back to a default.  Exit
codes: 0 success / all verdicts pass, 1 numerical failure or verdict fail,
2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, stability
from .forms import QuadConfig, assemble_all
from .geometry import GeometryError, LevelSet, assign_kt, check_assumptions, classify
from .mesh import MeshError, build_uniform_mesh
from .solver import SolverError, solve
from .spaces import ELEMENT_PAIRS, build_system


class ConfigError(Exception):
    pass


def _parse_list(cast):
    return lambda s: [cast(tok) for tok in s.split()]


# section -> key -> (cast, default); None default means required when used
SCHEMA = {
    "geometry": {
        "kind": (str, "circle"),
        "cx": (float, 0.0), "cy": (float, 0.0), "r": (float, 1.0),
        "a": (float, 1.0), "b": (float, 0.5),
    },
    "mesh": {
        "x0": (float, -1.5), "y0": (float, -1.5),
        "x1": (float, 1.5), "y1": (float, 1.5),
        "n": (int, 16),
        "levels": (_parse_list(int), [8, 16, 32, 64]),
        "shift_x": (float, 0.0), "shift_y": (float, 0.0),
        "perturbation": (float, 0.0), "seed": (int, 0),
    },
    "discretization": {
        "pair": (str, "taylor-hood-p2p1"),
        "eta": (float, 20.0),
        "gamma_g": (float, 1.0), "gamma_p": (float, 1.0),
    },
    "quadrature": {
        "method": (str, None),
        "degree": (int, 0),
        "depth": (int, 4),
        "depth_increment": (int, 1),
    },
    "case": {"name": (str, "disk")},
    "stability": {
        "levels": (_parse_list(int), [8, 16, 32]),
        "shifts": (int, 10),
        "shift_seed": (int, 20260810),
        "etas": (_parse_list(float), [20.0]),
        "pairs": (_parse_list(str), ["taylor-hood-p2p1", "mini-p1bp1", "p2p0disc"]),
        "constants": (_parse_list(str), list(stability.ALL_CONSTANTS)),
        "sliver_eps": (_parse_list(float), []),
    },
    "output": {"dir": (str, "out"), "vtk": (str, "")},
    "run": {"jobs": (int, 1)},
}

EOC_THRESHOLDS = {
    "taylor-hood-p2p1": {"h1_u": 1.85, "l2_u": 2.80, "l2_p": 1.85, "product": 1.85},
    "mini-p1bp1": {"h1_u": 0.90, "l2_u": 1.85, "l2_p": 0.90},
    "p2p0disc": {"product": 0.90},
}


def load_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        cfg[section] = {}
        for key, raw in parser[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            cast, _ = SCHEMA[section][key]
            try:
                cfg[section][key] = cast(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from exc
    # fill defaults
    for section, keys in SCHEMA.items():
        cfg.setdefault(section, {})
        for key, (_, default) in keys.items():
            cfg[section].setdefault(key, default)
    _validate(cfg)
    return cfg


def _validate(cfg):
    geo = cfg["geometry"]
    if geo["kind"] not in ("circle", "ellipse"):
        raise ConfigError(f"geometry kind must be circle or ellipse, got {geo['kind']!r}")
    pair = cfg["discretization"]["pair"]
    if pair not in ELEMENT_PAIRS:
        raise ConfigError(f"unknown element pair {pair!r}")
    for p in cfg["stability"]["pairs"]:
        if p not in ELEMENT_PAIRS:
            raise ConfigError(f"unknown element pair {p!r} in stability sweep")
    method = cfg["quadrature"]["method"]
    if method is not None and method not in ("circle-exact", "subtriangulate"):
        raise ConfigError(f"unknown quadrature method {method!r}")
    if method == "circle-exact" and geo["kind"] != "circle":
        raise ConfigError("circle-exact quadrature requires circle geometry")
    if not (0.0 <= cfg["mesh"]["perturbation"] < 0.25):
        raise ConfigError("perturbation must lie in [0, 0.25)")
    unknown = set(cfg["stability"]["constants"]) - set(stability.ALL_CONSTANTS)
    if unknown:
        raise ConfigError(f"unknown stability constants {sorted(unknown)}")


def _geometry_tuple(cfg):
    g = cfg["geometry"]
    if g["kind"] == "circle":
        return ("circle", g["cx"], g["cy"], g["r"])
    return ("ellipse", g["cx"], g["cy"], g["a"], g["b"])


def _levelset(cfg):
    g = _geometry_tuple(cfg)
    return LevelSet.circle(*g[1:]) if g[0] == "circle" else LevelSet.ellipse(*g[1:])


def _quad_config(cfg):
    q = cfg["quadrature"]
    method = q["method"]
    if method is None:
        method = "circle-exact" if cfg["geometry"]["kind"] == "circle" else "subtriangulate"
    deg = q["degree"] if q["degree"] > 0 else None
    return QuadConfig(method=method, depth=q["depth"], degree_volume=deg,
                      degree_surface=deg, degree_face=deg)


def _box(cfg):
    m = cfg["mesh"]
    return ((m["x0"], m["y0"]), (m["x1"], m["y1"]))


def _outdir(cfg, args):
    out = os.environ.get("CUTSTOKES_OUT") or args.out or cfg["output"]["dir"]
    os.makedirs(out, exist_ok=True)
    return out


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_classify(cfg, args):
    m = cfg["mesh"]
    mesh = build_uniform_mesh(_box(cfg), m["n"], (m["shift_x"], m["shift_y"]),
                              m["perturbation"], m["seed"])
    phi = _levelset(cfg)
    cls = classify(mesh, phi)
    try:
        cls = assign_kt(mesh, cls)
    except GeometryError:
        pass
    report = check_assumptions(mesh, cls)
    summary = {
        "n": m["n"],
        "h": mesh.h,
        "counts": {
            "interior": int(len(cls.interior_tris)),
            "cut": int(len(cls.cut_tris)),
            "exterior": int(len(cls.exterior_tris)),
        },
        "faces": {
            "interior": int(len(cls.faces_interior)),
            "ghost": int(len(cls.faces_ghost)),
            "active": int(len(cls.faces_active)),
        },
        "assumptions": report.summary(),
    }
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0 if report.ok else 1


def _write_vtk(path, system, sol):
    """Legacy ASCII unstructured-grid dump: vertex velocity and pressure."""
    mesh, cls = system.mesh, system.cls
    active_verts = np.nonzero(system.v_vertex_dof >= 0)[0]
    remap = -np.ones(mesh.n_vertices, dtype=np.int64)
    remap[active_verts] = np.arange(len(active_verts))
    ns = system.n_scalar
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nunfitted stokes solution\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(active_verts)} double\n")
        for v in mesh.vertices[active_verts]:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} 0\n")
        tris = [mesh.triangles[int(t)] for t in cls.active_tris]
        fh.write(f"CELLS {len(tris)} {4 * len(tris)}\n")
        for tri in tris:
            fh.write(f"3 {remap[tri[0]]} {remap[tri[1]]} {remap[tri[2]]}\n")
        fh.write(f"CELL_TYPES {len(tris)}\n")
        fh.write("\n".join(["5"] * len(tris)) + "\n")
        fh.write(f"POINT_DATA {len(active_verts)}\n")
        fh.write("VECTORS velocity double\n")
        for v in active_verts:
            d = system.v_vertex_dof[v]
            fh.write(f"{sol.u[d]:.17g} {sol.u[d + ns]:.17g} 0\n")
        if system.pair.pressure_continuous:
            fh.write("SCALARS pressure double\nLOOKUP_TABLE default\n")
            for v in active_verts:
                fh.write(f"{sol.p[system.p_vertex_dof[v]]:.17g}\n")


def cmd_solve(cfg, args):
    case = analysis.BUILTIN_CASES[cfg["case"]["name"]]()
    m, d = cfg["mesh"], cfg["discretization"]
    system, sol, err, times, extras = analysis.run_single_level(
        case, d["pair"], _box(cfg), m["n"], (m["shift_x"], m["shift_y"]),
        eta=d["eta"], gamma_g=d["gamma_g"], gamma_p=d["gamma_p"],
        quad=_quad_config(cfg), perturbation=m["perturbation"], seed=m["seed"],
    )
    out = {
        "n": m["n"], "pair": d["pair"],
        "ndof_u": system.n_velocity, "ndof_p": system.n_pressure,
        "residual": sol.residual,
        "err_h1_u": err.err_h1_u, "err_l2_u": err.err_l2_u,
        "err_l2_p": err.err_l2_p, "err_product": err.err_product,
        "t_assemble_s": times[0], "t_solve_s": times[1],
    }
    print(json.dumps(out, indent=1, sort_keys=True))
    if cfg["output"]["vtk"]:
        outdir = _outdir(cfg, args)
        _write_vtk(os.path.join(outdir, cfg["output"]["vtk"]), system, sol)
    return 0


def cmd_convergence(cfg, args):
    case_name = cfg["case"]["name"]
    m, d, q = cfg["mesh"], cfg["discretization"], cfg["quadrature"]
    record = analysis.run_convergence(
        case_name, d["pair"], _box(cfg), m["levels"],
        shift=(m["shift_x"], m["shift_y"]), eta=d["eta"],
        gamma_g=d["gamma_g"], gamma_p=d["gamma_p"],
        quad=_quad_config(cfg), depth_increment=q["depth_increment"],
    )
    outdir = _outdir(cfg, args)
    base = os.path.join(outdir, f"convergence_{case_name}_{d['pair']}")
    analysis.write_convergence_csv(base + ".csv", record)
    analysis.write_convergence_json(base + ".json", record)

    ok = True
    thresholds = EOC_THRESHOLDS.get(d["pair"], {})
    eocs = {
        "h1_u": record.eoc_h1_u, "l2_u": record.eoc_l2_u,
        "l2_p": record.eoc_l2_p, "product": record.eoc_product,
    }
    for key, bound in thresholds.items():
        seq = eocs[key]
        value = seq[-1] if seq else math.nan
        passed = bool(np.isfinite(value) and value >= bound)
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} eoc {key} = {value:.3f} (>= {bound})")
    for warning in record.stall_warnings:
        print(f"WARN {warning}")
    print(f"artifacts: {base}.csv {base}.json")
    return 0 if ok else 1


def _sweep_worker(task):
    return stability.measure_configuration(**task)


def cmd_stability_sweep(cfg, args):
    s = cfg["stability"]
    geometry = _geometry_tuple(cfg)
    quad = _quad_config(cfg)
    d = cfg["discretization"]
    shift_scale = (cfg["mesh"]["x1"] - cfg["mesh"]["x0"]) / max(s["levels"])
    shifts = stability.random_shifts(s["shifts"], shift_scale, s["shift_seed"])

    tasks = []
    for pair in s["pairs"]:
        for n in s["levels"]:
            all_shifts = list(shifts)
            for eps in s["sliver_eps"]:
                if geometry[0] == "circle":
                    all_shifts.append(stability.vertex_touching_shift(
                        _box(cfg), n, geometry[1:4], eps))
            for shift in all_shifts:
                for eta in s["etas"]:
                    tasks.append(dict(
                        pair=pair, n=n, shift=shift, geometry=geometry,
                        box=_box(cfg), eta=eta, gamma_g=d["gamma_g"],
                        gamma_p=d["gamma_p"], quad=quad,
                        constants=tuple(s["constants"]),
                    ))

    jobs = args.jobs or cfg["run"]["jobs"]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_sweep_worker, tasks))
    else:
        reports = [_sweep_worker(t) for t in tasks]

    outdir = _outdir(cfg, args)
    stability.write_sweep_csv(os.path.join(outdir, "stability_sweep.csv"), reports)
    stability.write_sweep_json(os.path.join(outdir, "stability_sweep.json"), reports)

    ok = True
    if "theta" in s["constants"]:
        thetas = np.array([r.theta_h for r in reports if np.isfinite(r.theta_h)])
        if len(thetas):
            passed = thetas.min() >= 0.01 and thetas.min() / thetas.max() >= 0.4
            ok &= bool(passed)
            print(f"{'PASS' if passed else 'FAIL'} theta in [{thetas.min():.4f}, {thetas.max():.4f}]")
    if "c0" in s["constants"]:
        c0s = np.array([r.c0 for r in reports if np.isfinite(r.c0)])
        if len(c0s):
            passed = bool(c0s.min() > 0.0)
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'} c0 min = {c0s.min():.4f}")
    print(f"rows: {len(reports)}; artifacts in {outdir}")
    return 0 if ok else 1


COMMANDS = {
    "classify": cmd_classify,
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "stability-sweep": cmd_stability_sweep,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cutstokes",
        description="Unfitted finite elements for the Stokes problem with a "
                    "stability-constant laboratory",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--jobs", type=int, default=None, help="sweep parallelism")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except (ConfigError, configparser.Error) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg, args)
    except (MeshError, GeometryError, SolverError, analysis.AnalysisError,
            stability.StabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
