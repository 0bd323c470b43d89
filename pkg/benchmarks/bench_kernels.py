"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N time per kernel and backend, plus the speedup when
both backends are present.
"""
import argparse
import math
import timeit

from aqft1d import kernels


def _ccr_table(k):
    # tau_ij = i - j gives a dense, deterministic table
    return [[1j * (a - b) for b in range(k)] for a in range(k)]


def _car_table(k):
    return [[complex(1.0 if a == b else 0.5) for b in range(k)] for a in range(k)]


CASES = {
    "normal_order/ccr len 8": lambda m: m.normal_order(
        (3, 2, 1, 0, 3, 2, 1, 0), 1.0, _ccr_table(4), False, True),
    "normal_order/car len 8": lambda m: m.normal_order(
        (3, 2, 1, 0, 3, 2, 1, 0), 1.0, _car_table(4), True, True),
    "adaptive_simpson/oscillatory": lambda m: m.adaptive_simpson(
        lambda s: math.sin(30.0 * s) * math.exp(-s * s), -4.0, 4.0, 1e-10, 40, 4),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = kernels.backends()
    print(f"default backend: {kernels.BACKEND}")
    for name, case in CASES.items():
        times = {}
        for backend, mod in impls.items():
            t = timeit.Timer(lambda: case(mod))
            n, _ = t.autorange()
            times[backend] = min(t.repeat(args.repeat, n)) / n
        line = "  ".join(f"{b}={1e3 * s:8.3f} ms" for b, s in times.items())
        if len(times) == 2:
            line += f"  speedup={times['python'] / times['cython']:.1f}x"
        print(f"{name:32s} {line}")


if __name__ == "__main__":
    main()
