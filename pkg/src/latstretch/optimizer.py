"""Optimal determinant-one stretches: exact in the plane, heuristic above.

In two dimensions the stretch is ``A = diag(e^t, e^-t)`` and a lattice point
``n`` lies in ``A(rΩ)`` for ``t`` in a closed interval (its gauge along the
orbit is unimodal in ``t``).  The objective count is therefore piecewise
constant with breakpoints at the interval endpoints, and a sweep over the
sorted endpoints yields the count on every plateau at once.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .asymptotics import fit_exponent, fmt
from .counting import count_nonnegative, count_positive
from .errors import InvalidInputError, TooLargeError
from .geometry import BOUNDARY_TOL, DiagonalStretch, pell_threshold
from .kernels import NONNEGATIVE, POSITIVE

MAXIMIZE_POSITIVE = "maximize_positive"
MINIMIZE_NONNEGATIVE = "minimize_nonnegative"
OBJECTIVES = (MAXIMIZE_POSITIVE, MINIMIZE_NONNEGATIVE)
DEFAULT_HALF_WIDTH = 1.1
CANDIDATE_BUDGET = 10 ** 7
BREAKPOINT_MERGE = 1e-12
PRESAMPLE_STEP = 1e-3
FINE_STEP = 1e-5
TIE_QUANTUM = 1e-10


@dataclass(frozen=True)
class Plateau:
    t_lo: float
    t_hi: float
    count: int

    @property
    def midpoint(self):
        return 0.5 * (self.t_lo + self.t_hi)


@dataclass(frozen=True)
class OptimizationResult:
    A_opt: DiagonalStretch
    count: int
    objective: str
    deviation: float
    tie_set_size: int | None = None
    plateau: Plateau | None = None
    plateau_edges: np.ndarray | None = field(default=None, repr=False)
    plateau_counts: np.ndarray | None = field(default=None, repr=False)
    heuristic: bool = False
    flags: tuple = ()
    evaluations: int = 0

    @property
    def plateaus(self):
        """Every plateau of the sweep, in increasing ``t``."""
        if self.plateau_edges is None:
            return ()
        e, c = self.plateau_edges, self.plateau_counts
        return tuple(Plateau(float(e[i]), float(e[i + 1]), int(c[i])) for i in range(c.size))

    @property
    def a_opt(self):
        """``||A_opt^{-1}||_inf``."""
        return self.A_opt.sup_inverse

    @property
    def first_entry(self):
        """``a`` in ``A = diag(a, 1/a)`` for planar results."""
        return self.A_opt.entries[0]


@dataclass(frozen=True)
class SweepRow:
    r: float
    a_opt: float
    deviation: float
    bound: float
    count: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    exponent: float | None
    results: tuple = field(default=(), repr=False)


def _check_objective(objective):
    if objective not in OBJECTIVES:
        raise InvalidInputError(f"objective must be one of {OBJECTIVES}, got {objective!r}")


def objective_count(body, A, r, objective):
    if objective == MAXIMIZE_POSITIVE:
        return count_positive(body, A, r)
    return count_nonnegative(body, A, r)


def _better(objective, new, old):
    return new > old if objective == MAXIMIZE_POSITIVE else new < old


def stretch_2d(t):
    return DiagonalStretch((math.exp(t), math.exp(-t)))


# ---------------------------------------------------------------------------
# membership intervals

def _pell_candidate_estimate(b1, b2, p, thr, t_lo, t_hi):
    root = thr ** (1.0 / p)
    n1_max = b1 * math.exp(t_hi) * root + 1
    n2_max = b2 * math.exp(-t_lo) * root + 1
    hyper = b1 * b2 * (0.5 * thr) ** (2.0 / p)
    return min(n1_max * n2_max, hyper * (math.log(max(n1_max, 1.0)) + 1.0) + n1_max + n2_max)


def membership_intervals(body, r, t_lo, t_hi, mode):
    """``(lo, hi, flags)``: the ``t``-interval of every point that is ever inside."""
    if body.is_p_ellipsoid:
        p = body.p
        thr = pell_threshold(p)
        b1, b2 = r * body.semi_axes[0], r * body.semi_axes[1]
        if _pell_candidate_estimate(b1, b2, p, thr, t_lo, t_hi) > CANDIDATE_BUDGET:
            raise TooLargeError(f"more than {CANDIDATE_BUDGET} breakpoint candidates")
        lo, hi, _, _ = kernels.pell_intervals(b1, b2, p, thr, t_lo, t_hi, mode)
        return lo, hi, ()
    return _generic_intervals(body, r, t_lo, t_hi, mode)


def _orbit_gauge(body, r, t, n1, n2):
    X = np.stack([np.exp(-t) * n1 / r, np.exp(t) * n2 / r], axis=-1)
    return body.gauge_values(X)


def _generic_intervals(body, r, t_lo, t_hi, mode):
    level = 1.0 + BOUNDARY_TOL
    first = 0 if mode == NONNEGATIVE else 1
    c1, c2 = body.axis_extents
    n1_max = int(math.floor(c1 * r * math.exp(t_hi))) + 1
    n2_max = int(math.floor(c2 * r * math.exp(-t_lo))) + 1
    size = (n1_max - first + 1) * (n2_max - first + 1)
    if size > CANDIDATE_BUDGET:
        raise TooLargeError(f"{size} breakpoint candidates exceed the budget of {CANDIDATE_BUDGET}")
    n1, n2 = np.meshgrid(np.arange(first, n1_max + 1), np.arange(first, n2_max + 1), indexing="ij")
    n1, n2 = n1.ravel().astype(float), n2.ravel().astype(float)
    if t_hi == t_lo:
        inside = _orbit_gauge(body, r, np.full(n1.size, t_lo), n1, n2) <= level
        k = int(inside.sum())
        return np.full(k, t_lo), np.full(k, t_lo), ()

    grid = np.linspace(t_lo, t_hi, max(2, int(math.ceil((t_hi - t_lo) / PRESAMPLE_STEP)) + 1))
    G = np.empty((n1.size, grid.size))
    chunk = max(1, 2_000_000 // grid.size)
    for i in range(0, n1.size, chunk):
        sl = slice(i, i + chunk)
        G[sl] = _orbit_gauge(body, r, grid[None, :], n1[sl, None], n2[sl, None])

    diffs = np.diff(G, axis=1)
    scale = 1e-12 * np.maximum(G[:, 1:], 1.0)
    sgn = np.where(diffs > scale, 1, np.where(diffs < -scale, -1, 0))
    # unimodal: no descent after the first ascent
    ascended = np.maximum.accumulate(sgn == 1, axis=1)
    non_unimodal = np.any(ascended & (sgn == -1), axis=1)

    los, his = [], []
    uni = ~non_unimodal
    if uni.any():
        lo, hi = _unimodal_intervals(body, r, grid, G[uni], n1[uni], n2[uni], level)
        los.append(lo)
        his.append(hi)
    flags = ()
    if non_unimodal.any():
        flags = ("non_unimodal",)
        fine = np.linspace(t_lo, t_hi, max(2, int(math.ceil((t_hi - t_lo) / FINE_STEP)) + 1))
        for i in np.flatnonzero(non_unimodal):
            lo, hi = _sampled_intervals(body, r, fine, n1[i], n2[i], level)
            los.append(lo)
            his.append(hi)
    if not los:
        return np.empty(0), np.empty(0), flags
    return np.concatenate(los), np.concatenate(his), flags


def _bisect_root(body, r, n1, n2, inside_t, outside_t, level, iters=60):
    a, b = inside_t.copy(), outside_t.copy()
    for _ in range(iters):
        mid = 0.5 * (a + b)
        ok = _orbit_gauge(body, r, mid, n1, n2) <= level
        a = np.where(ok, mid, a)
        b = np.where(ok, b, mid)
    return a


def _unimodal_intervals(body, r, grid, G, n1, n2, level):
    m, last = G.shape[0], grid.size - 1
    imin = np.argmin(G, axis=1)
    a = grid[np.maximum(imin - 1, 0)]
    b = grid[np.minimum(imin + 1, last)]
    # golden-section search for the minimiser inside the bracket
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(60):
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        left = _orbit_gauge(body, r, x1, n1, n2) <= _orbit_gauge(body, r, x2, n1, n2)
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
    t_star = 0.5 * (a + b)
    g_star = _orbit_gauge(body, r, t_star, n1, n2)
    g_grid = G[np.arange(m), imin]
    use_grid = g_grid <= g_star
    t_star = np.where(use_grid, grid[imin], t_star)
    g_star = np.minimum(g_star, g_grid)
    ever = g_star <= level
    n1, n2, t_star = n1[ever], n2[ever], t_star[ever]
    t_lo, t_hi = grid[0], grid[-1]
    at_lo = _orbit_gauge(body, r, np.full(n1.size, t_lo), n1, n2) <= level
    at_hi = _orbit_gauge(body, r, np.full(n1.size, t_hi), n1, n2) <= level
    lo = np.where(at_lo, t_lo, _bisect_root(body, r, n1, n2, t_star, np.full(n1.size, t_lo), level))
    hi = np.where(at_hi, t_hi, _bisect_root(body, r, n1, n2, t_star, np.full(n1.size, t_hi), level))
    return lo, hi


def _sampled_intervals(body, r, fine, n1, n2, level):
    inside = _orbit_gauge(body, r, fine, np.full(fine.size, n1), np.full(fine.size, n2)) <= level
    edges = np.flatnonzero(np.diff(inside.astype(np.int8)))
    starts = [0] if inside[0] else []
    ends = []
    for e in edges:
        if inside[e + 1]:
            starts.append(e + 1)
        else:
            ends.append(e)
    if inside[-1]:
        ends.append(fine.size - 1)
    one = np.ones(1)
    lo, hi = [], []
    for s, e in zip(starts, ends):
        a = fine[s] if s == 0 else _bisect_root(body, r, n1 * one, n2 * one, fine[s] * one, fine[s - 1] * one, level)[0]
        b = fine[e] if e == fine.size - 1 else _bisect_root(
            body, r, n1 * one, n2 * one, fine[e] * one, fine[e + 1] * one, level)[0]
        lo.append(a)
        hi.append(b)
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


# ---------------------------------------------------------------------------
# plateau sweep

def plateau_counts(lo, hi, t_lo, t_hi):
    """Plateau edges and the number of intervals covering each open plateau."""
    if t_hi == t_lo:
        return np.array([t_lo, t_hi]), np.array([lo.size], dtype=np.int64)
    pts = np.concatenate([lo, hi])
    pts = np.unique(pts[(pts > t_lo) & (pts < t_hi)])
    if pts.size:
        keep = np.concatenate([[True], np.diff(pts) > BREAKPOINT_MERGE])
        pts = pts[keep]
    edges = np.concatenate([[t_lo], pts, [t_hi]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    counts = np.searchsorted(np.sort(lo), mids, side="right") - np.searchsorted(np.sort(hi), mids, side="left")
    return edges, counts.astype(np.int64)


def _closest_to_identity(tied, mids):
    # mirrored plateaus differ in |mid| only by rounding; quantise so the
    # positive side wins deterministically
    m = mids[tied]
    return tied[np.lexsort((-m, np.round(np.abs(m) / TIE_QUANTUM)))]


def _default_interval(body, r):
    C = body.bounding_constant
    limit = math.log(C * r) if C * r > 1.0 else 0.0
    half = min(DEFAULT_HALF_WIDTH, max(0.0, limit - 1e-9))
    return math.exp(-half), math.exp(half)


def optimize_d2_exact(body, r, objective=MAXIMIZE_POSITIVE, search_interval=None):
    """Exact optimal stretch ``diag(a, 1/a)`` over ``a`` in ``search_interval``.

    Ties are broken towards the plateau whose midpoint is closest to the
    identity; the reported ``a`` is that plateau's midpoint.
    """
    _check_objective(objective)
    if body.dimension != 2:
        raise InvalidInputError("the exact optimiser needs a planar body")
    if not (math.isfinite(r) and r > 0):
        raise InvalidInputError(f"r must be positive, got {r!r}")
    a_lo, a_hi = search_interval if search_interval is not None else _default_interval(body, r)
    C = body.bounding_constant
    if not (a_lo <= 1.0 <= a_hi):
        raise InvalidInputError(f"search interval [{a_lo}, {a_hi}] must contain 1")
    if not (1.0 / (C * r) < a_lo and a_hi < C * r) and (a_lo, a_hi) != (1.0, 1.0):
        raise InvalidInputError(
            f"search interval [{a_lo}, {a_hi}] must lie strictly inside (1/(C r), C r) = ({1 / (C * r)}, {C * r})"
        )
    t_lo, t_hi = math.log(a_lo), math.log(a_hi)
    mode = POSITIVE if objective == MAXIMIZE_POSITIVE else NONNEGATIVE
    lo, hi, flags = membership_intervals(body, r, t_lo, t_hi, mode)
    edges, counts = plateau_counts(lo, hi, t_lo, t_hi)

    best = counts.max() if objective == MAXIMIZE_POSITIVE else counts.min()
    mids = 0.5 * (edges[:-1] + edges[1:])
    tied = np.flatnonzero(counts == best)
    order = _closest_to_identity(tied, mids)
    chosen = None
    for i in order:
        if objective_count(body, stretch_2d(mids[i]), r, objective) == best:
            chosen = int(i)
            break
    if chosen is None:
        # breakpoint rounding collapsed a plateau: fall back to direct evaluation
        flags = flags + ("sweep_mismatch",)
        counts = np.array([objective_count(body, stretch_2d(m), r, objective) for m in mids], dtype=np.int64)
        best = counts.max() if objective == MAXIMIZE_POSITIVE else counts.min()
        tied = np.flatnonzero(counts == best)
        order = _closest_to_identity(tied, mids)
        chosen = int(order[0])
    A = stretch_2d(float(mids[chosen]))
    return OptimizationResult(
        A_opt=A,
        count=int(best),
        objective=objective,
        deviation=A.deviation(),
        tie_set_size=int(tied.size),
        plateau=Plateau(float(edges[chosen]), float(edges[chosen + 1]), int(counts[chosen])),
        plateau_edges=edges,
        plateau_counts=counts,
        flags=tuple(flags),
        evaluations=int(counts.size),
    )


# ---------------------------------------------------------------------------
# heuristic search

STEP_START = 0.2
STEP_FLOOR = 1e-4
RANDOM_STARTS = 8
START_RADIUS = 0.7


def _random_start(rng, d):
    t = rng.uniform(-START_RADIUS, START_RADIUS, d)
    t -= t.mean()
    peak = np.max(np.abs(t))
    if peak > START_RADIUS:
        t *= START_RADIUS / peak
    return t


def _starts(rng, d):
    """Identity, then the fixed random starts, then further seeded starts forever."""
    yield np.zeros(d), True
    for _ in range(RANDOM_STARTS):
        yield _random_start(rng, d), True
    while True:
        yield _random_start(rng, d), False


def optimize_general(body, r, objective=MAXIMIZE_POSITIVE, seed=0, budget=20000):
    """Multi-start coordinate-pattern search over ``log A`` with ``Σ t_j = 0``.

    Searches from the identity and ``RANDOM_STARTS`` seeded points, then keeps
    restarting from further seeded points until ``budget`` distinct stretches
    have been evaluated.  The objective is integer-valued and piecewise
    constant, so the result is a lower bound on the true maximum (upper bound
    for the minimum).  ``budget_exhausted`` is flagged only when one of the
    initial starts could not run down to the step floor.
    """
    _check_objective(objective)
    if body.dimension < 2:
        raise InvalidInputError("need dimension >= 2")
    if budget < 1000:
        raise InvalidInputError(f"budget must be at least 1000 evaluations, got {budget}")
    d = body.dimension
    rng = np.random.default_rng(seed)
    directions = []
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros(d)
            e[i], e[j] = 1.0, -1.0
            directions.extend([e, -e])

    cache = {}

    def evaluate(t):
        key = tuple(np.round(t, 12))
        if key not in cache:
            cache[key] = objective_count(body, DiagonalStretch.from_log(t - t.mean()), r, objective)
        return cache[key]

    exhausted = False
    best_t, best_val = None, None
    for start, required in _starts(rng, d):
        if len(cache) >= budget:
            break
        t = start
        val = evaluate(t)
        step = STEP_START
        while step >= STEP_FLOOR:
            if len(cache) >= budget:
                exhausted = required
                break
            for e in directions:
                cand = t + step * e
                v = evaluate(cand)
                if _better(objective, v, val):
                    t, val = cand, v
                    break
            else:
                step *= 0.5
        if (best_val is None or _better(objective, val, best_val)
                or (val == best_val and np.max(np.abs(t)) < np.max(np.abs(best_t)))):
            best_t, best_val = t, val
    A = DiagonalStretch.from_log(best_t - best_t.mean())
    flags = ("heuristic",) + (("budget_exhausted",) if exhausted else ())
    return OptimizationResult(
        A_opt=A,
        count=int(best_val),
        objective=objective,
        deviation=A.deviation(),
        heuristic=True,
        flags=flags,
        evaluations=len(cache),
    )


# ---------------------------------------------------------------------------
# convergence experiments

def deviation_bound(r, d):
    """``r^{-(d-1)/(2(d+1))}``, the convergence-rate shape of the optimal stretch."""
    return r ** (-(d - 1) / (2.0 * (d + 1)))


def convergence_sweep(body, r_grid, objective=MAXIMIZE_POSITIVE, mode="exact_d2", seed=0, budget=20000,
                      search_interval=None):
    r_grid = [float(r) for r in r_grid]
    if any(b < a for a, b in zip(r_grid, r_grid[1:])):
        raise InvalidInputError("r grid must be sorted ascending")
    if mode not in ("exact_d2", "heuristic"):
        raise InvalidInputError(f"mode must be 'exact_d2' or 'heuristic', got {mode!r}")
    if mode == "exact_d2" and body.dimension != 2:
        raise InvalidInputError("exact_d2 mode needs a planar body")
    rows, results = [], []
    for r in r_grid:
        if mode == "exact_d2":
            res = optimize_d2_exact(body, r, objective, search_interval)
        else:
            res = optimize_general(body, r, objective, seed=seed, budget=budget)
        results.append(res)
        rows.append(SweepRow(r, res.a_opt, res.deviation, deviation_bound(r, body.dimension), res.count))
    try:
        exponent = fit_exponent([row.r for row in rows], [row.deviation for row in rows])
    except InvalidInputError:
        exponent = None
    return SweepResult(tuple(rows), exponent, tuple(results))


def sweep_to_csv(sweep):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r", "a_opt", "deviation", "bound", "count"])
    for row in sweep.rows:
        writer.writerow([fmt(row.r), fmt(row.a_opt), fmt(row.deviation), fmt(row.bound), row.count])
    writer.writerow(["exponent", "" if sweep.exponent is None else fmt(sweep.exponent), "", "", ""])
    return buf.getvalue()


def result_to_dict(res, include_plateaus=False):
    out = {
        "objective": res.objective,
        "A": list(res.A_opt.entries),
        "a_opt": res.a_opt,
        "count": res.count,
        "deviation": res.deviation,
        "heuristic": res.heuristic,
        "flags": list(res.flags),
        "evaluations": res.evaluations,
    }
    if res.tie_set_size is not None:
        out["tie_set_size"] = res.tie_set_size
    if res.plateau is not None:
        out["plateau"] = [res.plateau.t_lo, res.plateau.t_hi]
    if include_plateaus:
        out["plateaus"] = [[p.t_lo, p.t_hi, p.count] for p in res.plateaus]
    return out
