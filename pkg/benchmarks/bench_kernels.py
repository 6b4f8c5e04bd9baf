"""Time the numba and numpy kernel backends on the same workloads.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each workload is run on both backends; results must agree exactly, and the
table reports the best wall time per backend and the speedup.
"""
import argparse
import math
import time

from latstretch import _accel
from latstretch.geometry import ConvexBody, DiagonalStretch
from latstretch.counting import count_all, count_positive
from latstretch.optimizer import optimize_d2_exact

DISK = ConvexBody.ball(2, 0.5)
BALL3 = ConvexBody.ball(3, 1.0 / math.sqrt(math.pi))
SUPER = ConvexBody.p_ellipsoid(3.0, (1.0, 0.8, 1.25))

WORKLOADS = [
    ("disk all, r=2000", lambda: count_all(DISK, DiagonalStretch.identity(2), 2000.0)),
    ("disk positive, A=(2,1/2), r=5000", lambda: count_positive(DISK, DiagonalStretch((2.0, 0.5)), 5000.0)),
    ("ball3 all, r=150", lambda: count_all(BALL3, DiagonalStretch.identity(3), 150.0)),
    ("p=3 body positive, r=200", lambda: count_positive(SUPER, DiagonalStretch.identity(3), 200.0)),
    ("exact d=2 optimum, r=400", lambda: optimize_d2_exact(DISK, 400.0).count),
]


def best_time(fn, repeat):
    best, value = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    # compile once outside the timed region
    previous = _accel.set_backend("numba")
    for _, fn in WORKLOADS:
        fn()

    print(f"{'workload':36s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}  result")
    for name, fn in WORKLOADS:
        _accel.set_backend("numba")
        t_numba, v_numba = best_time(fn, args.repeat)
        _accel.set_backend("numpy")
        t_numpy, v_numpy = best_time(fn, args.repeat)
        if v_numba != v_numpy:
            raise SystemExit(f"{name}: backends disagree ({v_numba} vs {v_numpy})")
        print(f"{name:36s} {t_numba:10.4f} {t_numpy:10.4f} {t_numpy / t_numba:8.1f}  {v_numba}")
    _accel.set_backend(previous)


if __name__ == "__main__":
    main()
