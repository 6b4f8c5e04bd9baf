"""Exact lattice-point counts in stretched bodies ``A(rΩ)``.

Every count uses the closed convention (boundary points are inside) through
:func:`latstretch.geometry.lattice_member`.  Bodies are unconditional, so the
full-lattice, nonnegative and hyperplane counts can all be assembled from
positive counts on coordinate sections; each of those routes is also
available as a direct enumeration and the two are cross-checked by
:func:`count_report`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError, OracleTooLargeError, TooLargeError
from .geometry import (
    BOUNDARY_TOL,
    DiagonalStretch,
    extent_bisect,
    lattice_member,
    pell_scale,
    pell_threshold,
)
from .kernels import ALL, NONNEGATIVE, POSITIVE

MAX_AXIS_SPAN = 1e6
BRUTE_FORCE_LIMIT = 10 ** 9
SUBSETS = ("positive", "nonnegative", "all", "nonzero", "hyperplane")


@dataclass(frozen=True)
class LatticeCountReport:
    positive: int
    nonnegative: int
    all: int
    nonzero: int
    hyperplane_union: int
    per_hyperplane: tuple

    def as_dict(self):
        return {
            "positive": self.positive,
            "nonnegative": self.nonnegative,
            "all": self.all,
            "nonzero": self.nonzero,
            "hyperplane_union": self.hyperplane_union,
            "per_hyperplane": list(self.per_hyperplane),
        }


def _check_r(r):
    if not (isinstance(r, (int, float, np.floating, np.integer)) and math.isfinite(r) and r > 0):
        raise InvalidInputError(f"r must be a positive finite number, got {r!r}")
    return float(r)


def stretch_entries(body, A, unimodular=True):
    """Validate ``A`` against ``body`` and return its entries as an array."""
    if not isinstance(A, DiagonalStretch):
        A = DiagonalStretch(tuple(A))
    if A.dimension != body.dimension:
        raise InvalidInputError(f"stretch has {A.dimension} entries, body has dimension {body.dimension}")
    if unimodular:
        A.require_unimodular()
    return A.array


class _Frame:
    """A body at a fixed stretch and scale, restricted to a subset of axes."""

    def __init__(self, body, a, r, keep=None):
        self.body = body
        self.keep = tuple(range(body.dimension)) if keep is None else tuple(keep)
        self.a = np.asarray(a, dtype=float)
        self.r = r
        spans = self.a * r * np.asarray(body.axis_extents)
        if np.any(spans > MAX_AXIS_SPAN):
            raise TooLargeError(f"stretched extent {spans.max():.3g} exceeds {MAX_AXIS_SPAN:.0e} lattice units")

    @property
    def dim(self):
        return len(self.keep)

    def section(self, keep):
        return _Frame(self.body, self.a, self.r, keep)

    def count(self, mode):
        if self.dim == 0:
            return 1
        body = self.body
        if body.is_p_ellipsoid:
            w = pell_scale(body, self.a, self.r)[list(self.keep)]
            return kernels.pell_count(w, body.p, pell_threshold(body.p), mode)
        return _generic_count(self, mode)

    # generic-gauge helpers, in full-dimensional coordinates
    def _embed(self, Y):
        X = np.zeros((Y.shape[0], self.body.dimension))
        X[:, list(self.keep)] = Y
        return X

    def gauge_section(self, Y):
        return self.body.gauge_values(self._embed(Y))

    def member(self, N):
        s = (self.a * self.r)[list(self.keep)]
        return self.gauge_section(N / s) <= 1.0 + BOUNDARY_TOL


def _generic_count(frame, mode):
    # level-wise enumeration: bisection gives the frontier, the shared
    # membership predicate settles the integer boundary exactly
    d = frame.dim
    s = (frame.a * frame.r)[list(frame.keep)]
    upper = np.asarray(frame.body.axis_extents)[list(frame.keep)]
    prefixes = np.zeros((1, 0), dtype=np.int64)
    total = 0
    for k in range(d):
        m = prefixes.shape[0]
        X = np.zeros((m, d))
        X[:, :k] = prefixes / s[:k]
        ext = extent_bisect(frame.gauge_section, X, k, upper[k], level=1.0 + BOUNDARY_TOL)
        lim = np.floor(ext * s[k]).astype(np.int64)
        N = np.zeros((m, d))
        N[:, :k] = prefixes
        while True:
            N[:, k] = lim + 1
            step = frame.member(N)
            if not step.any():
                break
            lim += step
        while True:
            N[:, k] = lim
            back = (lim > 0) & ~frame.member(N)
            if not back.any():
                break
            lim -= back
        if k == d - 1:
            total = int(kernels._inner_vec(mode, lim).sum())
            break
        start = kernels._start_vec(mode, lim)
        rows, vals = kernels.expand_ranges(start, lim - start + 1)
        prefixes = np.column_stack([prefixes[rows], vals])
    return total


def _frame(body, A, r, unimodular=True):
    return _Frame(body, stretch_entries(body, A, unimodular), _check_r(r))


def _sections(d):
    """Pairs ``(zeroed, kept)`` over all subsets of axes set to zero."""
    axes = range(d)
    for size in range(d + 1):
        for zeroed in itertools.combinations(axes, size):
            yield zeroed, tuple(j for j in axes if j not in zeroed)


# ---------------------------------------------------------------------------
# Public counters

def count_positive(body, A, r):
    """``#{n in Z^d_{>0} ∩ A(rΩ)}``."""
    return _frame(body, A, r).count(POSITIVE)


def count_all(body, A, r, method="direct"):
    """``#{n in Z^d ∩ A(rΩ)}``, by direct enumeration or by ``2^d·positive + hyperplane_union``."""
    frame = _frame(body, A, r)
    if method == "direct":
        return frame.count(ALL)
    if method == "identity":
        return 2 ** frame.dim * frame.count(POSITIVE) + _hyperplane_union(frame)[0]
    raise InvalidInputError(f"unknown method {method!r}")


def _hyperplane_union(frame):
    d = frame.dim
    union = 0
    for zeroed, kept in _sections(d):
        if zeroed:
            union += (-1) ** (len(zeroed) + 1) * frame.section(kept).count(ALL)
    per = tuple(frame.section(tuple(k for k in range(d) if k != j)).count(ALL) for j in range(d))
    return union, per


def count_hyperplane_union(body, A, r):
    """Points of ``A(rΩ)`` with at least one zero coordinate, by full inclusion-exclusion.

    Returns ``(union, per_hyperplane)`` where ``per_hyperplane[j]`` counts the
    points with ``n_j = 0``.
    """
    return _hyperplane_union(_frame(body, A, r))


def count_nonnegative(body, A, r, method="sections"):
    """``#{n in Z^d_{>=0} ∩ A(rΩ)}``: sum of positive counts over all coordinate sections."""
    frame = _frame(body, A, r)
    if method == "direct":
        return frame.count(NONNEGATIVE)
    if method == "sections":
        return sum(frame.section(kept).count(POSITIVE) for _, kept in _sections(frame.dim))
    raise InvalidInputError(f"unknown method {method!r}")


def count_nonzero(body, A, r):
    """Points with no zero coordinate; ``2^d`` times the positive count by unconditionality."""
    frame = _frame(body, A, r)
    return 2 ** frame.dim * frame.count(POSITIVE)


def count_report(body, A, r, check=True):
    """All counts at once.  With ``check``, the alternative routes must agree exactly."""
    frame = _frame(body, A, r)
    d = frame.dim
    positive = frame.count(POSITIVE)
    union, per = _hyperplane_union(frame)
    total = 2 ** d * positive + union
    nonneg = sum(frame.section(kept).count(POSITIVE) for _, kept in _sections(d))
    if check:
        direct_all = frame.count(ALL)
        direct_nonneg = frame.count(NONNEGATIVE)
        if direct_all != total or direct_nonneg != nonneg:
            raise RuntimeError(
                f"count routes disagree: all {direct_all} vs {total}, nonnegative {direct_nonneg} vs {nonneg}"
            )
    return LatticeCountReport(positive, nonneg, total, 2 ** d * positive, union, per)


def count_unnormalised(body, a, r, mode):
    """Count for a stretch that need not have determinant 1 (sections, Weyl cuboids)."""
    return _frame(body, a, r, unimodular=False).count(mode)


# ---------------------------------------------------------------------------
# Brute-force oracle

def _box(body, a, r):
    if body.is_p_ellipsoid:
        spans = pell_scale(body, a, r)
    else:
        spans = np.asarray(a) * r * np.asarray(body.axis_extents)
    return np.floor(spans * (1.0 + 1e-9)).astype(np.int64) + 1


def brute_force_report(body, A, r, unimodular=True, limit=BRUTE_FORCE_LIMIT):
    """Every subset count from one membership sweep over the bounding box."""
    a = stretch_entries(body, A, unimodular)
    r = _check_r(r)
    d = body.dimension
    E = _box(body, a, r)
    size = math.prod(int(2 * e + 1) for e in E)
    if size > limit:
        raise OracleTooLargeError(
            f"brute-force box has {size} points, limit is {limit}", box_size=size, limit=limit
        )
    rest = [np.arange(-e, e + 1) for e in E[1:]]
    rest_size = math.prod(len(v) for v in rest)
    chunk = max(1, 4_000_000 // max(rest_size, 1))
    totals = dict.fromkeys(SUBSETS, 0)
    per = np.zeros(d, dtype=np.int64)
    first = np.arange(-E[0], E[0] + 1)
    for i in range(0, first.size, chunk):
        grids = np.meshgrid(first[i:i + chunk], *rest, indexing="ij")
        N = np.stack([g.ravel() for g in grids], axis=-1)
        N = N[lattice_member(body, a, r, N)]
        zero = N == 0
        totals["all"] += N.shape[0]
        totals["positive"] += int(np.all(N > 0, axis=1).sum())
        totals["nonnegative"] += int(np.all(N >= 0, axis=1).sum())
        totals["nonzero"] += int((~zero.any(axis=1)).sum())
        totals["hyperplane"] += int(zero.any(axis=1).sum())
        per += zero.sum(axis=0)
    totals["per_hyperplane"] = tuple(int(v) for v in per)
    return totals


def brute_force_count(body, A, r, subset="positive"):
    """Ground-truth count by testing every point of the bounding box."""
    if subset not in SUBSETS:
        raise InvalidInputError(f"subset must be one of {SUBSETS}, got {subset!r}")
    return brute_force_report(body, A, r)[subset]
