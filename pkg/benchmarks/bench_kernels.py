"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 20000] [--end-to-end]

Kernel timings run in-process and exclude the first (compiling) call.
``--end-to-end`` also times a detector run in two subprocesses, one per
value of ``FDRSTREAM_DISABLE_NUMBA``.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from fdrstream import kernels
from fdrstream._accel import USE_NUMBA
from fdrstream.multiple_testing import count_bounds, lord_gamma


def make_cases(size, seed=0):
    rng = np.random.default_rng(seed)
    m, n = 100, 999
    bounds = count_bounds(0.1, m, n).astype(float)
    counts = rng.integers(0, n + 1, size).astype(float)
    scores = rng.standard_normal(size)
    labels = (rng.random(size) < 0.01).astype(np.int8)
    init = rng.standard_normal(n)
    gamma = lord_gamma(size + 1)
    pool = rng.standard_normal(size + n)
    starts = np.sort(rng.integers(0, size, m)).astype(np.int64)
    x = rng.standard_normal(m)
    values = rng.random(11 * 100)
    group_of = np.repeat(np.arange(11), 100)
    perms = np.argsort(rng.random((200, values.size)), axis=1)
    return {
        "sliding_stepup": (counts, bounds, m),
        "block_stepup": (counts, bounds, m),
        "lord3_run": (counts / n, gamma, 0.05, 0.05),
        "sliding_calibration_loop": (scores, labels, False, init, n, m, kernels.MODE_OVERLAPPING, bounds, 0,
                                     np.zeros(1), 0.0, 0.0),
        "overlap_counts": (pool, starts, n, x),
        "permutation_gaps": (values, group_of, 11, perms),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def end_to_end(size):
    code = ("import time, numpy as np; from fdrstream import *; "
            f"s = generate_mixture(MixtureConfig(0.01, length={size}, seed=1)); "
            "c = DetectorConfig(calibration=CalibrationSpec('sliding', 1899, initial=np.random.default_rng(0).standard_normal(1899))); "
            "run_stream(s, c); t = time.perf_counter(); run_stream(s, c); print(time.perf_counter() - t)")
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, FDRSTREAM_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        out["numpy" if flag == "1" else "numba"] = float(res.stdout.strip().splitlines()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=20_000)
    ap.add_argument("--end-to-end", action="store_true")
    a = ap.parse_args(argv)
    cases = make_cases(a.size)
    print(f"{'kernel':<26}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, args in cases.items():
        jit_fn, np_fn = kernels.IMPLEMENTATIONS[name]
        t_np = best_of(np_fn, args, a.repeat)
        if USE_NUMBA:
            jit_fn(*args)
            t_jit = best_of(jit_fn, args, a.repeat)
            print(f"{name:<26}{t_jit * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_jit:>9.1f}x")
        else:
            print(f"{name:<26}{'disabled':>12}{t_np * 1e3:>12.2f}{'':>10}")
    if a.end_to_end:
        r = end_to_end(10 * a.size)
        print(f"\nrun_stream, T={10 * a.size}: numba {r['numba']:.3f}s, numpy {r['numpy']:.3f}s, "
              f"speedup {r['numpy'] / r['numba']:.1f}x")


if __name__ == "__main__":
    main()
