#!/usr/bin/env python3
"""Head-to-head timing of the compiled evaluation kernels against the
numpy fallback on a representative planning workload.

Both backends are imported directly, so a single run produces the
comparison regardless of which one the package itself selected.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from surveyopt import generate_qmc_points, load_scenario
from surveyopt._kernels import fallback

try:
    from surveyopt._kernels import _core
except ImportError:
    _core = None

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "quick.yaml"


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_workload(n_steps: int, n_points: int, seed: int):
    s = load_scenario(SCENARIO)
    rng = np.random.default_rng(seed)
    veh = s.vehicle
    t_final = n_steps * 0.5
    # Smooth rudder history on the half-step grid, well inside the limit.
    tt = np.linspace(0.0, 1.0, 2 * n_steps + 1)
    d_half = 0.5 * veh.max_rudder * np.sin(2.0 * np.pi * 3.0 * tt)
    y0 = np.array([1000.0, 1000.0, 0.3, 0.0])
    states = fallback.simulate_rk4(y0, d_half, t_final, n_steps,
                                   veh.speed, veh.nomoto_gain, veh.nomoto_time)
    pts = generate_qmc_points(s.qmc, s.domain).flat[:n_points]
    pack = s.sensor.pack()
    dt = t_final / n_steps
    wE = rng.uniform(0.0, 1.0, pts.shape[0])
    lam_in = rng.normal(size=(n_steps + 1, 4))
    args = {
        "exposure_forward": (states, pts, pack, dt),
        "exposure_backward": (states, pts, pack, dt, wE),
        "simulate_rk4": (y0, d_half, t_final, n_steps,
                         veh.speed, veh.nomoto_gain, veh.nomoto_time),
        "rk4_adjoint": (states, d_half, t_final, n_steps,
                        veh.speed, veh.nomoto_gain, veh.nomoto_time, lam_in),
    }
    return args


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000,
                    help="simulation steps in the workload")
    ap.add_argument("--points", type=int, default=4096,
                    help="risk evaluation points")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repeats, best is reported")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    work = build_workload(a.steps, a.points, a.seed)
    print(f"workload: {a.steps} steps, {a.points} points, "
          f"best of {a.repeats}")
    if _core is None:
        print("compiled extension not available, timing fallback only")
    header = f"{'kernel':<20} {'fallback':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call_args in work.items():
        fb_fn = getattr(fallback, name)
        t_fb = best_of(lambda: fb_fn(*call_args), a.repeats)
        if _core is not None:
            co_fn = getattr(_core, name)
            # The extension wants contiguous float64 input.
            c_args = tuple(
                np.ascontiguousarray(x, dtype=np.float64)
                if isinstance(x, np.ndarray) else x
                for x in call_args)
            ref = fb_fn(*call_args)
            got = co_fn(*c_args)
            if isinstance(ref, tuple):
                agree = all(np.allclose(r, g, rtol=1e-12, atol=1e-12)
                            for r, g in zip(ref, got))
            else:
                agree = np.allclose(ref, got, rtol=1e-12, atol=1e-12)
            t_co = best_of(lambda: co_fn(*c_args), a.repeats)
            mark = "" if agree else "  MISMATCH"
            print(f"{name:<20} {t_fb * 1e3:>10.2f}ms {t_co * 1e3:>10.2f}ms "
                  f"{t_fb / t_co:>8.1f}x{mark}")
        else:
            print(f"{name:<20} {t_fb * 1e3:>10.2f}ms {'-':>12} {'-':>9}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
