"""Compiled vs NumPy scan kernel on a desk-scale fringe scan (1e9 rad/s fringes).

    python benchmarks/bench_kernels.py [--offsets 2000] [--points 16384] [--threads 1]

Reports ns per (offset, frequency) pair for each backend and the largest
relative disagreement between them.
"""
import argparse
import time

import numpy as np

from conveyorsync import kernels
from conveyorsync.optics import DelayDrive, DispersionProfile, FrequencyGrid, PulseSpectrum, fringe_scan


def timed(fn, repeat):
    best = np.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--offsets", type=int, default=2000)
    parser.add_argument("--points", type=int, default=2 ** 14)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    omega0, c = 2.4e15, 2.99792458e8
    drive = DelayDrive(1e9 * c / (8 * omega0), c)
    spectrum = PulseSpectrum(omega0, 1e13, 1.0)
    grid = FrequencyGrid(args.points)
    offsets = np.linspace(-5e-8, 5e-8, args.offsets)
    pairs = args.offsets * args.points

    results, seconds_by = {}, {}
    backends = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])
    for backend in backends:
        seconds, (_, cross, par) = timed(
            lambda: fringe_scan(
                spectrum, drive, DispersionProfile.none(), offsets,
                grid=grid, backend=backend, num_threads=args.threads, as_arrays=True,
            ),
            args.repeat,
        )
        results[backend] = cross
        seconds_by[backend] = seconds
        print(f"{backend:>9}: {seconds:8.3f} s  {1e9 * seconds / pairs:7.2f} ns/pair")
    if len(results) == 2:
        ref = results["python"]
        print(f"speed-up: {seconds_by['python'] / seconds_by['compiled']:.1f}x")
        rel = np.max(np.abs(results["compiled"] - ref) / np.maximum(np.abs(ref), 1e-300))
        print(f"max relative difference between backends: {rel:.2e}")

if __name__ == "__main__":
    main()
