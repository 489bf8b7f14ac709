#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python fallback.

Times the two hot kernels in isolation and a full vehicle run end to end with
each backend active.  Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from safechain import _kernels
from safechain._kernels import _ref
from safechain.scenarios import build_vehicle_scenario
from safechain.sim import run_closed_loop

try:
    from safechain._kernels import _fast
except ImportError:
    _fast = None


def best_of(fn, repeats=5):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_jet_mul(mod, n_calls=20_000):
    rng = np.random.default_rng(1)
    a = np.ascontiguousarray(rng.normal(size=(3, 5)))
    b = np.ascontiguousarray(rng.normal(size=(3, 5)))

    def run():
        f = mod.jet_mul
        for _ in range(n_calls):
            f(a, b)

    return best_of(run) / n_calls


def bench_observer(mod, n_calls=20_000):
    rng = np.random.default_rng(2)
    state = [np.ascontiguousarray(rng.normal(size=2)) for _ in range(7)]

    def run():
        f = mod.observer_step_core
        for _ in range(n_calls):
            f(*state, 1e-3, 20.0, 10.0, 10.0, 10.0)

    return best_of(run) / n_calls


def bench_vehicle(backend_mod):
    # rebind the active kernel functions, run the full scenario, restore
    saved = (_kernels.jet_mul, _kernels.observer_step_core)
    _kernels.jet_mul = backend_mod.jet_mul
    _kernels.observer_step_core = backend_mod.observer_step_core
    try:
        cfg = build_vehicle_scenario("dorcbf", {"duration": 5.0})
        return best_of(lambda: run_closed_loop(cfg), repeats=3)
    finally:
        _kernels.jet_mul, _kernels.observer_step_core = saved


def main():
    backends = [("python", _ref)]
    if _fast is not None:
        backends.append(("cython", _fast))
    else:
        print("compiled backend not built; showing the fallback only\n")

    rows = []
    for name, mod in backends:
        rows.append((name,
                     bench_jet_mul(mod) * 1e6,
                     bench_observer(mod) * 1e6,
                     bench_vehicle(mod)))

    print(f"{'backend':<10}{'jet_mul [us]':>14}{'observer step [us]':>20}"
          f"{'vehicle 5 s run [s]':>22}")
    for name, mul_us, obs_us, run_s in rows:
        print(f"{name:<10}{mul_us:>14.2f}{obs_us:>20.2f}{run_s:>22.3f}")
    if len(rows) == 2:
        print(f"{'speedup':<10}{rows[0][1] / rows[1][1]:>13.1f}x"
              f"{rows[0][2] / rows[1][2]:>19.1f}x"
              f"{rows[0][3] / rows[1][3]:>21.1f}x")

    # identical math, identical traces: spot-check once at the end
    if _fast is not None:
        rng = np.random.default_rng(3)
        a = np.ascontiguousarray(rng.normal(size=(4, 7)))
        b = np.ascontiguousarray(rng.normal(size=(4, 7)))
        assert _ref.jet_mul(a, b).tobytes() == _fast.jet_mul(a, b).tobytes()
        print("\nbackends agree bit for bit on a random jet product")


if __name__ == "__main__":
    main()
