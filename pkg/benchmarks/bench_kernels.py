"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--particles 40]

The maneuver kernel is timed on the Case-1 planning problem (one swarm
batch per call); projection is timed on a 360-vertex polyline.
"""

import argparse
import time

import numpy as np

from curvyplan import _kernels
from curvyplan.cli import case_context
from curvyplan.geometry import build_reference_path


def best_of(fn, repeat):
    fn()  # warm up and compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--particles", type=int, default=40)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; only the numpy path is available")

    ctx = case_context("case1")
    rng = np.random.default_rng(0)
    lo, hi = ctx.bounds[:, 0], ctx.bounds[:, 1]
    X = lo + rng.random((args.particles, 2)) * (hi - lo)
    win, px, py, ph, pk = ctx._window
    bc = np.array([ctx.d0, ctx.d_dot0, ctx.d_ddot0, ctx.d_target, ctx.s0])
    veh = np.array([ctx.vehicle.wheelbase, ctx.vehicle.lr, ctx.limits.mu * ctx.limits.g])
    call = (X, bc, win, px, py, ph, pk, ctx.hdv_positions, ctx.dt, veh)

    a = _kernels.maneuver_batch_jit(*call)
    b = _kernels.maneuver_batch_numpy(*call)
    print(f"maneuver batch agreement: max |jit - numpy| = {np.max(np.abs(a - b)):.3e}")

    ang = np.linspace(0, 2 * np.pi, 361)
    path = build_reference_path(np.column_stack([65.5 * np.cos(ang), 65.5 * np.sin(ang)])[:-1], closed=True)
    pts = rng.uniform(-70, 70, (256, 2))

    def proj(fn):
        return lambda: [fn(path.waypoints, path.cumulative_s, x, y) for x, y in pts]

    rows = [
        ("maneuver_batch", lambda: _kernels.maneuver_batch_jit(*call), lambda: _kernels.maneuver_batch_numpy(*call)),
        ("project_polyline x256", proj(_kernels.project_polyline_jit), proj(_kernels.project_polyline_numpy)),
    ]
    print(f"{'kernel':24s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, f_jit, f_np in rows:
        tj, _ = best_of(f_jit, args.repeat)
        tn, _ = best_of(f_np, args.repeat)
        print(f"{name:24s} {1e3 * tj:10.3f} {1e3 * tn:10.3f} {tn / tj:8.1f}x")


if __name__ == "__main__":
    main()
