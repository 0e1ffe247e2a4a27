"""Command-line entry point: ``aronsson [options] COMMAND [--key value ...]``.

Every run writes its artifacts plus ``manifest.json`` (library version,
resolved config, config hash, output digests) into the output directory.
Exit codes: 0 success or pass, 1 property violation (or failed criterion),
2 configuration or input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .battery import CRITERIA, run_criterion
from .comparison import (Region, check_amle, check_cgca, check_cgcb, check_extremum_principle, check_harnack,
                         check_kcomparison, check_segment)
from .cone import cone_batch
from .config import (COMMANDS, PROPERTIES, SCHEMA, RunConfig, load_config, parse_field, parse_floats, parse_point,
                     parse_points)
from .errors import ConvergenceError, InputError
from .field import slope_estimate
from .hamiltonian import reflect
from .singularity import ClassifyConfig, classify, flow_trace
from .solver import GridSpec, disk_region, relax, residual

OUT_ENV = "ARONSSON_OUT"
EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


def _jsonify(v):
    if isinstance(v, dict):
        return {str(k): _jsonify(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonify(w) for w in v]
    if isinstance(v, np.ndarray):
        return _jsonify(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    return v


class Writer:
    """Collects artifacts in the output directory; floats use round-trip repr."""

    def __init__(self, out: Path):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = {}

    def _record(self, name):
        self.files[name] = hashlib.sha256((self.out / name).read_bytes()).hexdigest()

    def json(self, name, obj):
        (self.out / name).write_text(json.dumps(_jsonify(obj), indent=2, sort_keys=True) + "\n")
        self._record(name)

    def csv(self, name, header, rows):
        with open(self.out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self._record(name)


# ----------------------------------------------------------------------------
# commands


def cmd_cone(cfg: RunConfig, w: Writer) -> int:
    s = cfg.section("cone")
    H = cfg.hamiltonian()
    if s["points"]:
        X = parse_points(s["points"])
    else:
        if s["directions"] < 1:
            raise InputError("directions must be positive")
        th = 2 * np.pi * np.arange(s["directions"]) / s["directions"]
        X = np.column_stack([np.cos(th), np.sin(th)])
    Hc = reflect(H) if s["hat"] else H
    levels = parse_floats(s["k"], "k")
    if levels.size == 0 or np.any(levels <= 0):
        raise InputError("[cone] k must be a list of positive levels")
    rows, worst = [], 0.0
    for k in levels:
        vals, P, _, res = cone_batch(Hc, float(k), X)
        rows += [(float(k), x[0], x[1], v, p[0], p[1], r) for x, v, p, r in zip(X, vals, P, res)]
        worst = max(worst, float(np.nanmax(res)))
    w.csv("cone.csv", ["k", "x1", "x2", "value", "p1", "p2", "kkt_residual"], rows)
    w.json("cone.json", {"hamiltonian": Hc.name, "levels": levels, "n_points": len(X),
                         "max_kkt_residual": worst})
    return EXIT_OK


def cmd_slope(cfg: RunConfig, w: Writer) -> int:
    s = cfg.section("slope")
    H = cfg.hamiltonian()
    u = parse_field(s["field"], H)
    est = slope_estimate(u, H, parse_point(s["center"], "center"), parse_floats(s["radii"], "radii"), s["samples"])
    w.csv("slope.csv", ["r", "S_plus", "S_minus"], zip(est.radii, est.s_plus, est.s_minus))
    w.json("slope.json", {"monotone_plus": est.monotone_plus, "monotone_minus": est.monotone_minus,
                          "samples": s["samples"]})
    return EXIT_OK


def _segment_pairs(region: Region, n: int, rng):
    """Random pairs inside a disk region (segments stay inside by convexity)."""
    if region.inner > 0:
        raise InputError("the segment property needs a disk (inner = 0)")
    r = region.outer * np.sqrt(rng.uniform(0, 1, (n, 2)))
    th = rng.uniform(0, 2 * np.pi, (n, 2))
    pts = region.c + np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    return pts


def cmd_check(cfg: RunConfig, w: Writer) -> int:
    s = cfg.section("check")
    H = cfg.hamiltonian()
    prop = s["property"]
    if prop not in PROPERTIES:
        raise InputError(f"[check] property must be one of {', '.join(PROPERTIES)}")
    u = parse_field(s["field"], H)
    tol = None if s["tol"] == "auto" else float(s["tol"])
    center = parse_point(s["center"], "center")
    region = Region(tuple(center), s["inner"], s["outer"])
    N, n_int = s["samples"], s["interior"]
    if prop == "cgca":
        rep = check_cgca(u, H, region, N=N, n_interior=n_int, tol=tol)
    elif prop == "cgcb":
        rep = check_cgcb(u, H, region, N=N, n_interior=n_int, tol=tol)
    elif prop == "amle":
        rep = check_amle(u, H, region, tol=tol)
    elif prop == "kcomp":
        rep = check_kcomparison(u, H, region, N=N, n_interior=n_int, tol=tol, side=s["side"])
    elif prop == "segment":
        pairs = _segment_pairs(region, s["pairs"], np.random.default_rng(cfg.seed))
        rep = check_segment(u, H, s["level"], pairs, tol=tol)
    elif prop == "harnack":
        rep = check_harnack(u, H, center, parse_floats(s["radii"], "radii"), N, R=s["outer"], tol=tol)
        rep.details["center"] = center
    else:
        rep = check_extremum_principle(u, region, N, n_int, tol)
    w.json("report.json", rep.to_dict())
    print(f"{rep.property}: {rep.status}")
    return EXIT_VIOLATION if rep.status == "violation" else EXIT_OK


def cmd_solve(cfg: RunConfig, w: Writer) -> int:
    from .cone import cone_values
    from .field import cone_field, plane
    s = cfg.section("solve")
    H = cfg.hamiltonian()
    R, k = s["radius"], s["k"]
    pinned = None
    if s["pinned"].strip().lower() != "none":
        v = parse_floats(s["pinned"], "pinned")
        if v.size != 3:
            raise InputError("pinned must be none or x,y,b")
        pinned = (v[:2], v[2])
    region, exact = None, None
    if s["problem"] == "cone":
        data = exact = cone_field(H, k)
        pinned = pinned or ((0.0, 0.0), 0.0)
        half = R
    elif s["problem"] == "plane":
        data = exact = plane([0.7, -0.4], 0.2)
        half = R
    elif s["problem"] == "corollary":
        th = 2 * np.pi * np.arange(360) / 360
        half = float(np.max(1.0 / cone_values(H, k, np.column_stack([np.cos(th), np.sin(th)])))) * 1.05
        region = lambda X: cone_values(H, k, X.reshape(-1, 2)).reshape(X.shape[:-1]) < 1.0
        data = lambda X: np.ones(len(X))
        exact = cone_field(H, k)
        pinned = pinned or ((0.0, 0.0), 0.0)
    elif s["problem"] == "data":
        data = parse_field(s["field"], H)
        half = R
    else:
        raise InputError("[solve] problem must be cone, plane, corollary or data")
    spec = GridSpec.square((0.0, 0.0), half, s["n"])
    region = region or disk_region((0.0, 0.0), R)
    g = relax(data, H, spec, region, pinned, s["tau"], s["iters"], s["stop_tol"], s["cfl"])
    X = spec.coords()
    w.csv("grid.csv", ["x", "y", "u"], ((x[0], x[1], v) for x, v in zip(X.reshape(-1, 2), g.values.ravel())))
    stats = residual(g, H, mask=~g.fixed)
    info = {"spacing": spec.h, "nodes": [spec.nx, spec.ny], "iterations": g.sweeps, "status": g.status,
            "final_update": g.last_update, "residual": stats.to_dict(), "log": g.log}
    if exact is not None:
        info["max_error"] = g.node_error(exact)
    w.json("solve.json", info)
    print(f"solve: {g.status} after {g.sweeps} sweeps")
    return EXIT_OK if g.status == "converged" else EXIT_VIOLATION


def cmd_classify(cfg: RunConfig, w: Writer) -> int:
    s = cfg.section("classify")
    H = cfg.hamiltonian()
    u = parse_field(s["field"], H)
    rep = classify(u, H, parse_point(s["center"], "center"), ClassifyConfig(radius=s["radius"]))
    w.json("report.json", rep.to_dict())
    fr = rep.fit_residuals
    if fr:
        br = rep.branches
        w.csv("ladder.csv", ["scale", "affine_ratio", "k_plus", "plus_distance", "k_minus", "minus_distance"],
              zip(rep.scales, fr["affine_ratio"], br["cone_plus"]["levels"], fr["cone_plus_distance"],
                  br["cone_minus"]["levels"], fr["cone_minus_distance"]))
    print(f"classify: {rep.verdict} (b={rep.limit_value!r}, k={rep.fitted_level!r})")
    return EXIT_OK


def cmd_flow(cfg: RunConfig, w: Writer) -> int:
    s = cfg.section("flow")
    H = cfg.hamiltonian()
    u = parse_field(s["field"], H)
    ar = None if s["arrival_radius"] == "auto" else float(s["arrival_radius"])
    ft = flow_trace(u, H, parse_point(s["start"], "start"), s["step"], s["max_steps"],
                    parse_point(s["center"], "center"), ar)
    t = s["step"] * np.arange(len(ft.states))
    w.csv("trace.csv", ["t", "x", "y", "level"], zip(t, ft.states[:, 0], ft.states[:, 1], ft.levels))
    w.json("flow.json", ft.to_dict())
    print(f"flow: {ft.status}, level drift {ft.level_drift!r}")
    return EXIT_OK


def cmd_suite(cfg: RunConfig, w: Writer) -> int:
    sel = cfg.section("suite")["criteria"]
    numbers = sorted(CRITERIA) if sel == "all" else [int(v) for v in parse_floats(sel, "criteria")]
    if any(n not in CRITERIA for n in numbers):
        raise InputError(f"criteria must be among {sorted(CRITERIA)}")
    results = []
    for n in numbers:
        r = run_criterion(n, cfg.seed)
        print(r.line(), flush=True)
        results.append(r)
    w.json("suite.json", {"results": [r.to_dict() for r in results]})
    w.csv("suite.csv", ["criterion", "title", "passed"], ((r.number, r.title, r.passed) for r in results))
    npass = sum(r.passed for r in results)
    print(f"{npass}/{len(results)} criteria passed")
    return EXIT_OK if npass == len(results) else EXIT_VIOLATION


HANDLERS = {"cone": cmd_cone, "slope": cmd_slope, "check": cmd_check, "solve": cmd_solve,
            "classify": cmd_classify, "flow": cmd_flow, "suite": cmd_suite}


def _global_options(parser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="INI config file or a previous manifest.json")
    parser.add_argument("--out", default=d(None), help=f"output directory (default ${OUT_ENV} or ./aronsson-out/COMMAND)")
    parser.add_argument("--seed", type=int, default=d(None), help="random seed")
    parser.add_argument("--threads", type=int, default=d(1),
                        help="threads for compiled kernels (results do not depend on it)")
    parser.add_argument("--hamiltonian", default=d(None), help="Hamiltonian spec, e.g. anisotropic:1,0,4")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aronsson", description=__doc__.splitlines()[0])
    _global_options(ap, suppress=False)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, help=f"run the {cmd} command")
        _global_options(sp, suppress=True)
        for key, (typ, default, helptext) in SCHEMA[cmd].items():
            sp.add_argument(f"--{key.replace('_', '-')}", dest=f"opt_{key}", default=None,
                            help=f"{helptext} (default {default!r})")
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        overrides = {("run", "seed"): args.seed} if args.seed is not None else {}
        if args.hamiltonian is not None:
            overrides[("hamiltonian", "spec")] = args.hamiltonian
        for key in SCHEMA[args.command]:
            v = getattr(args, f"opt_{key}")
            if v is not None:
                overrides[(args.command, key)] = v
        cfg = load_config(args.command, args.config, overrides)
        if args.threads < 1:
            raise InputError("--threads must be positive")
        _backend.set_threads(args.threads)
        out = Path(args.out or os.environ.get(OUT_ENV) or Path("aronsson-out") / args.command)
        w = Writer(out)
        code = HANDLERS[args.command](cfg, w)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    manifest = {"version": __version__, "command": cfg.command, "config": cfg.to_dict(), "config_hash": cfg.hash(),
                "backend": _backend.BACKEND, "outputs": dict(sorted(w.files.items())), "exit_code": code}
    (out / "manifest.json").write_text(json.dumps(_jsonify(manifest), indent=2, sort_keys=True) + "\n")
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
