#!/usr/bin/env python3
"""
Compare the numba kernels with their pure-numpy fallbacks.

Inputs are synthetic click streams with the Fig. 3 preset rates (about
50 kHz triggers, 48 kHz per signal channel).  Each kernel is run on both
backends, the results are checked for equality and the best of N timings
is reported.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --seconds 20 --repeat 5 --output bench.json
"""

import argparse
import json
import os
import time

import numpy as np

from heralded_qng import kernels
from heralded_qng._accel import NUMBA_DISABLED_ENV

PS_PER_S = 10**12


def make_clicks(rng, rate, seconds):
    n = rng.poisson(rate * seconds)
    return np.sort(rng.integers(0, int(seconds * PS_PER_S), n)).astype(np.int64)


def timed(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(trig, a, b):
    widths = np.arange(2, 302, 2, dtype=np.int64) * 1000
    half, bw = 100_000, 2000
    dead_input = np.sort(np.concatenate([a, a[::7] + 30_000]))
    return {
        "scan_counts (150 windows)": lambda: kernels.scan_counts(trig, a, b, widths),
        "delay_hist (+/-100 ns, 2 ns)": lambda: kernels.delay_hist(trig, a, half, bw, 2 * half // bw),
        "threefold_hist (100 ns)": lambda: kernels.threefold_hist(trig, a, b, 50_000, bw, 100),
        "dead_time_mask (45 ns)": lambda: kernels.dead_time_mask(dead_input, 45_000),
    }


def with_backend(name, fn):
    if name == "numpy":
        os.environ[NUMBA_DISABLED_ENV] = "1"
    else:
        os.environ.pop(NUMBA_DISABLED_ENV, None)
    try:
        return fn()
    finally:
        os.environ.pop(NUMBA_DISABLED_ENV, None)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seconds", type=float, default=4.0, help="simulated acquisition time")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", help="write results as JSON")
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    trig = make_clicks(rng, 50e3, args.seconds)
    a = make_clicks(rng, 48e3, args.seconds)
    b = make_clicks(rng, 48e3, args.seconds)
    print(f"{trig.size} trigger, {a.size} A and {b.size} B clicks ({args.seconds:g} s)")

    # compile once outside the timings
    small = [x[:1000] for x in (trig, a, b)]
    for fn in cases(*small).values():
        with_backend("numba", fn)

    print(f"\n{'kernel':<30} {'numba (s)':>11} {'numpy (s)':>11} {'speedup':>9}  equal")
    print("-" * 70)
    results = []
    for name, fn in cases(trig, a, b).items():
        t_nb, out_nb = with_backend("numba", lambda: timed(fn, args.repeat))
        t_np, out_np = with_backend("numpy", lambda: timed(fn, args.repeat))
        equal = bool(np.array_equal(out_nb, out_np))
        print(f"{name:<30} {t_nb:>11.4f} {t_np:>11.4f} {t_np / t_nb:>8.1f}x  {equal}")
        results.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb, "equal": equal})

    if args.output:
        with open(args.output, "w") as fh:
            json.dump({"seconds": args.seconds, "repeat": args.repeat, "results": results}, fh, indent=2)
        print(f"\nwrote {args.output}")


if __name__ == "__main__":
    main()
