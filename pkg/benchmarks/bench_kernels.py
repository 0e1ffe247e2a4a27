"""Compiled kernels versus the numpy fallback.

Times the batched cone solve, the Jacobi relaxation and the midpoint
relaxation with both backends on the same inputs, checks that the results
agree, and prints a table (optionally JSON).

    python3 benchmarks/bench_kernels.py [--repeat 3] [--threads 1] [--json out.json]
"""
import argparse
import json
import time

import numpy as np

from aronsson import _backend, make_builtin, set_threads
from aronsson.cone import cone_batch
from aronsson.field import cone_field
from aronsson.solver import GridSpec, midpoint_relax, relax

PIN = ((0.0, 0.0), 0.0)


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n_points, grid_n, sweeps):
    H = make_builtin("shifted_smooth", c=0.3)
    X = np.random.default_rng(0).normal(size=(n_points, 2))
    spec = GridSpec.square((0.0, 0.0), 1.0, grid_n)
    data = cone_field(H, 1.0)
    iso = make_builtin("isotropic")
    return {
        f"cone_batch ({n_points} points)": lambda fp: cone_batch(H, 1.3, X, force_python=fp)[0],
        f"jacobi ({grid_n}x{grid_n}, {sweeps} sweeps)": lambda fp: relax(
            data, H, spec, pinned=PIN, iters=sweeps, stop_tol=0.0, force_python=fp).values,
        f"midpoint ({grid_n}x{grid_n}, {sweeps} sweeps)": lambda fp: midpoint_relax(
            cone_field(iso, 1.0), spec, pinned=PIN, iters=sweeps, stop_tol=0.0, force_python=fp).values,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--points", type=int, default=20_000)
    ap.add_argument("--grid", type=int, default=65)
    ap.add_argument("--sweeps", type=int, default=2000)
    ap.add_argument("--json", help="write the table as JSON")
    args = ap.parse_args()
    if _backend._kernels is None:
        raise SystemExit("compiled kernels are not built; nothing to compare")
    set_threads(args.threads)
    rows = []
    for name, fn in cases(args.points, args.grid, args.sweeps).items():
        tc, vc = best_of(lambda: fn(False), args.repeat)
        tp, vp = best_of(lambda: fn(True), args.repeat)
        diff = float(np.max(np.abs(np.asarray(vc) - np.asarray(vp))))
        rows.append({"kernel": name, "compiled_s": tc, "fallback_s": tp, "speedup": tp / tc, "max_abs_diff": diff})
    width = max(len(r["kernel"]) for r in rows)
    print(f"{'kernel':<{width}}  {'compiled':>10}  {'fallback':>10}  {'speedup':>8}  {'max|diff|':>10}")
    for r in rows:
        print(f"{r['kernel']:<{width}}  {r['compiled_s']:10.4f}  {r['fallback_s']:10.4f}  "
              f"{r['speedup']:8.1f}  {r['max_abs_diff']:10.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"threads": args.threads, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
