#!/usr/bin/env python3
"""Benchmark the compiled kernels against the plain-Python fallback.

Runs three representative workloads -- a 10 s pendulum closed loop, a
401 x 401 phase-plane scan, and a 20 s bicycle closed loop -- once in each
execution mode.  The modes are selected with the ``CBFTK_DISABLE_NUMBA``
environment variable, so each timing runs in a fresh subprocess.

Usage: python benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time

WORKLOADS = ("pendulum_sim", "pendulum_scan", "bicycle_sim")


def run_workloads():
    from cbftk import kernels
    from cbftk.analysis import grid_scan
    from cbftk.sim import simulate
    from cbftk.systems import bicycle_scenario, pendulum_scenario

    pendulum = pendulum_scenario()
    bicycle = bicycle_scenario()
    jobs = {
        "pendulum_sim": lambda: simulate(
            pendulum.system,
            pendulum.make_cbf("abc"),
            pendulum.filter_spec(),
            pendulum.x0,
            10.0,
            1e-3,
        ),
        "pendulum_scan": lambda: grid_scan(
            pendulum.make_cbf("abc"),
            pendulum.system,
            pendulum.window,
            (401, 401),
            alpha_outer=pendulum.alpha_outer,
        ),
        "bicycle_sim": lambda: simulate(
            bicycle.system,
            bicycle.make_cbf("abc"),
            bicycle.filter_spec(),
            bicycle.x0,
            20.0,
            1e-3,
        ),
    }
    results = {"numba": kernels.NUMBA_ENABLED}
    for name in WORKLOADS:
        job = jobs[name]
        job()  # warm-up (JIT compilation in the compiled mode)
        t0 = time.perf_counter()
        job()
        results[name] = time.perf_counter() - t0
    print(json.dumps(results))


def main():
    timings = {}
    for label, disable in (("numba", "0"), ("fallback", "1")):
        env = dict(os.environ, CBFTK_DISABLE_NUMBA=disable)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--run"],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return proc.returncode
        timings[label] = json.loads(proc.stdout.strip().splitlines()[-1])
    print(f"{'workload':<16}{'numba [s]':>12}{'fallback [s]':>14}{'speedup':>10}")
    for name in WORKLOADS:
        fast = timings["numba"][name]
        slow = timings["fallback"][name]
        print(f"{name:<16}{fast:>12.4f}{slow:>14.4f}{slow / fast:>9.1f}x")
    return 0


if __name__ == "__main__":
    if "--run" in sys.argv:
        run_workloads()
    else:
        sys.exit(main())
