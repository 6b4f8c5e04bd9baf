"""The twelve acceptance criteria, each at its stated threshold.

Run under pytest for one PASS/FAIL line per criterion in the terminal summary,
or directly with ``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from latstretch.asymptotics import (  # noqa: E402
    amgm_gap,
    fit_error_exponent,
    measure_error_series,
    weyl_cuboid_count,
)
from latstretch.counting import (  # noqa: E402
    brute_force_report,
    count_all,
    count_nonnegative,
    count_positive,
    count_report,
)
from latstretch.fourier import decay_check, sandwich_check  # noqa: E402
from latstretch.geometry import ConvexBody, DiagonalStretch, balanced_representative  # noqa: E402
from latstretch.optimizer import (  # noqa: E402
    MAXIMIZE_POSITIVE,
    MINIMIZE_NONNEGATIVE,
    convergence_sweep,
    optimize_d2_exact,
    stretch_2d,
)

from conftest import ACCEPTANCE_LINES, random_unimodular  # noqa: E402

HALF_DISK = ConvexBody.ball(2, 0.5)
UNIT_DISK = ConvexBody.ball(2)
I2 = DiagonalStretch.identity(2)


# --- criteria ----------------------------------------------------------------

@lru_cache(maxsize=1)
def _oracle_run():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    records = []
    for _ in range(200):
        d = int(rng.choice([2, 3]))
        p = float(rng.choice([1.5, 2.0, 3.0]))
        body = ConvexBody.p_ellipsoid(p, rng.uniform(0.5, 1.5, d))
        A = random_unimodular(rng, d)
        r = float(rng.uniform(1.0, 30.0))
        records.append((d, count_report(body, A, r, check=False), brute_force_report(body, A, r)))
    return records, time.perf_counter() - t0


def criterion_1():
    records, elapsed = _oracle_run()
    bad = 0
    for _, rep, bf in records:
        bad += (rep.positive, rep.nonnegative, rep.all, rep.nonzero, rep.hyperplane_union) != (
            bf["positive"], bf["nonnegative"], bf["all"], bf["nonzero"], bf["hyperplane"])
    return bad == 0 and elapsed < 60, f"{len(records)} instances, {bad} mismatches, {elapsed:.1f} s (limit 60 s)"


def criterion_2():
    records, _ = _oracle_run()
    bad = sum(rep.all != 2 ** d * rep.positive + rep.hyperplane_union for d, rep, _ in records)
    return bad == 0, f"all = 2^d positive + hyperplane_union on {len(records)} instances, {bad} violations"


def criterion_3():
    t0 = time.perf_counter()
    worst = max(abs(count_all(UNIT_DISK, I2, r) - math.pi * r * r) / r ** (2 / 3) for r in range(10, 501, 10))
    elapsed = time.perf_counter() - t0
    return worst <= 10 and elapsed < 30, f"max |N(r) - pi r^2| / r^(2/3) = {worst:.4f} (limit 10), {elapsed:.2f} s"


A_GRID = (1.0, 1.5, 2.0, 3.0)
R_GRID = range(10, 301, 10)


def criterion_4():
    worst, slope = 0.0, None
    for a in A_GRID:
        rows = measure_error_series(HALF_DISK, DiagonalStretch((a, 1 / a)), R_GRID)
        worst = max(worst, max(row.normalized for row in rows))
        if a == 1.0:
            slope = fit_error_exponent(rows)
    ok = worst <= 10 and slope <= 2 / 3 + 0.15
    return ok, f"max normalised error {worst:.4f} (limit 10), exponent at a=1 {slope:.4f} (limit {2 / 3 + 0.15:.4f})"


def criterion_5():
    worst = 0.0
    for a in A_GRID:
        rows = measure_error_series(HALF_DISK, DiagonalStretch((a, 1 / a)), R_GRID, variant="hyperplane")
        worst = max(worst, max(row.normalized for row in rows))
    return worst <= 10, f"max |hyperplane - tr(A^-1) r| / (a^(4/3) r^(2/3)) = {worst:.4f} (limit 10)"


def criterion_6():
    rng = np.random.default_rng(6)
    section_err, idem_err = 0.0, 0.0
    for _ in range(100):
        d = int(rng.integers(2, 5))
        body = ConvexBody.p_ellipsoid(float(rng.choice([1.5, 2.0, 3.0, 4.0])), np.exp(rng.uniform(-2, 2, d)))
        _, balanced = balanced_representative(body)
        section_err = max(section_err, max(abs(s - 1) for s in balanced.cross_sections))
        B2, _ = balanced_representative(balanced)
        idem_err = max(idem_err, float(np.max(np.abs(B2.array - 1))))
    ok = section_err <= 1e-9 and idem_err <= 1e-9
    return ok, f"max |section - 1| = {section_err:.2e}, max |B2 - Id| = {idem_err:.2e} (limits 1e-9)"


def criterion_7():
    t0 = time.perf_counter()
    sweep = convergence_sweep(HALF_DISK, range(20, 401, 20))
    elapsed = time.perf_counter() - t0
    devs = [row.deviation for row in sweep.rows]
    late = max(row.deviation for row in sweep.rows if row.r >= 100)
    first, last = max(devs[:10]), max(devs[-10:])
    ok = late <= 0.25 and last < first and sweep.exponent <= -1 / 6 + 0.2 and elapsed < 600
    return ok, (f"max deviation for r >= 100 {late:.4f} (limit 0.25), decade maxima {first:.4f} -> {last:.4f}, "
                f"exponent {sweep.exponent:.4f} (limit {-1 / 6 + 0.2:.4f}), {elapsed:.1f} s")


def criterion_8():
    rng = np.random.default_rng(8)
    beaten = 0
    radii = rng.uniform(20, 200, 20)
    for r in radii:
        mx = optimize_d2_exact(HALF_DISK, r, MAXIMIZE_POSITIVE)
        mn = optimize_d2_exact(HALF_DISK, r, MINIMIZE_NONNEGATIVE)
        for t in rng.uniform(-math.log(3), math.log(3), 1000):
            A = stretch_2d(t)
            beaten += count_positive(HALF_DISK, A, r) > mx.count
            beaten += count_nonnegative(HALF_DISK, A, r) < mn.count
    return beaten == 0, f"{len(radii)} radii x 1000 random stretches x 2 objectives, {beaten} stretches beat the optimum"


def criterion_9():
    rng = np.random.default_rng(9)
    negative, quad_fail, near = 0, 0, 0
    for k in range(1000):
        d = int(rng.integers(2, 6))
        scale = 0.3 if k % 2 else 1.5
        t = rng.uniform(-scale, scale, d)
        t -= t.mean()
        A = DiagonalStretch.from_log(t)
        gap = amgm_gap(A)
        negative += gap < 0
        dev = A.deviation()
        if dev <= 0.5:
            near += 1
            quad_fail += gap < dev ** 2 / 8
    identity = amgm_gap(DiagonalStretch.identity(3))
    ok = negative == 0 and quad_fail == 0 and identity == 0.0
    return ok, (f"1000 stretches: {negative} negative gaps, {quad_fail}/{near} below ||A-Id||^2/8 near Id, "
                f"gap(Id) = {identity!r}")


def criterion_10():
    cells, failed = 0, []
    for A in (I2, DiagonalStretch((2.0, 0.5))):
        for r in (5.0, 10.0, 25.0, 50.0):
            for delta in (0.05, 0.1, 0.2):
                res = sandwich_check(HALF_DISK, A, r, delta)
                cells += 1
                if not res.passed:
                    failed.append((A.entries, r, delta))
    c = HALF_DISK.sandwich_constant
    return not failed, f"{cells} cells with c = 1/inradius = {c:g}, failures: {failed or 'none'}"


def criterion_11():
    value = decay_check(UNIT_DISK, np.logspace(0, 2, 400), 64)
    return value <= 1.0, f"max |xi|^(3/2) |chi_hat(xi)| = {value:.6f} over 400 shells x 64 directions (limit 1)"


def criterion_12():
    w = weyl_cuboid_count((1.0, 1.0), 25 * math.pi ** 2)
    errs = []
    for r in range(10, 201, 10):
        wr = weyl_cuboid_count((1.0, 1.0), math.pi ** 2 * r * r)
        errs.append(abs(wr.exact - wr.two_term) / wr.exact)
    target = 25 * math.pi / 4 - 5
    ok = w.exact == 15 and abs(w.two_term - target) <= 1e-3 and max(errs[-10:]) < max(errs[:10])
    return ok, (f"exact {w.exact}, two-term {w.two_term:.6f} (target {target:.6f}), "
                f"relative-error decade maxima {max(errs[:10]):.4f} -> {max(errs[-10:]):.4f}")


CRITERIA = [
    (1, "oracle equivalence", criterion_1),
    (2, "decomposition identity", criterion_2),
    (3, "Gauss circle", criterion_3),
    (4, "error shape d=2", criterion_4),
    (5, "hyperplane count", criterion_5),
    (6, "balancing", criterion_6),
    (7, "optimal stretch convergence", criterion_7),
    (8, "optimality certificates", criterion_8),
    (9, "AM-GM gap", criterion_9),
    (10, "sandwich bounds", criterion_10),
    (11, "transform decay", criterion_11),
    (12, "Weyl cuboid", criterion_12),
]


def _line(number, name, passed, detail):
    return f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"


@pytest.mark.parametrize("number, name, check", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(number, name, check):
    passed, detail = check()
    line = _line(number, name, passed, detail)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


if __name__ == "__main__":
    results = []
    for number, name, check in CRITERIA:
        passed, detail = check()
        results.append(passed)
        print(_line(number, name, passed, detail), flush=True)
    sys.exit(0 if all(results) else 1)
