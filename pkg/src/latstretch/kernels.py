"""Hot loops for p-ellipsoid bodies, in numba and numpy flavours.

A lattice point ``n`` lies in the stretched p-ellipsoid with half-widths
``w`` iff ``sum_j (|n_j| / w_j)^p <= thr``.  Both flavours accumulate that sum
left to right in the same order as :func:`latstretch.geometry.lattice_member`,
so they make bit-identical boundary decisions.

Enumeration modes: ``POSITIVE`` walks ``n_j >= 1``, ``NONNEGATIVE`` walks
``n_j >= 0`` and ``ALL`` walks the full symmetric range of every coordinate.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit, prange

POSITIVE = 0
NONNEGATIVE = 1
ALL = 2


# ---------------------------------------------------------------------------
# numba

@njit(cache=True, inline="always")
def _pw(x, p):
    # x*x is correctly rounded, exactly like pow(x, 2.0) and numpy's square path
    if p == 2.0:
        return x * x
    return x ** p


@njit(cache=True)
def _axis_max(part, w, p, thr):
    # largest m >= 0 with part + (m/w)^p <= thr; -1 when part alone exceeds thr
    if part > thr:
        return -1
    if p == 2.0:
        m = int(math.floor(w * math.sqrt(thr - part)))
    else:
        m = int(math.floor(w * (thr - part) ** (1.0 / p)))
    while part + _pw((m + 1) / w, p) <= thr:
        m += 1
    while m > 0 and part + _pw(m / w, p) > thr:
        m -= 1
    return m


@njit(cache=True)
def _start(mode, lim):
    if mode == POSITIVE:
        return 1
    if mode == NONNEGATIVE:
        return 0
    return -lim


@njit(cache=True)
def _inner(mode, m):
    if m < 0:
        return 0
    if mode == POSITIVE:
        return m
    if mode == NONNEGATIVE:
        return m + 1
    return 2 * m + 1


@njit(cache=True)
def _pell_rest(n0, w, p, thr, mode):
    # count points whose first coordinate is n0 (already known to be inside)
    d = w.shape[0]
    part = np.zeros(d)
    part[1] = 0.0 + _pw(abs(n0) / w[0], p)
    if d == 2:
        return _inner(mode, _axis_max(part[1], w[1], p, thr))
    n = np.zeros(d, np.int64)
    lim = np.zeros(d, np.int64)
    k = 1
    lim[1] = _axis_max(part[1], w[1], p, thr)
    n[1] = _start(mode, lim[1])
    total = 0
    while True:
        if n[k] > lim[k]:
            if k == 1:
                break
            k -= 1
            n[k] += 1
            continue
        part[k + 1] = part[k] + _pw(abs(n[k]) / w[k], p)
        if k == d - 2:
            total += _inner(mode, _axis_max(part[k + 1], w[d - 1], p, thr))
            n[k] += 1
        else:
            k += 1
            lim[k] = _axis_max(part[k], w[k], p, thr)
            n[k] = _start(mode, lim[k])
    return total


@njit(parallel=True, cache=True)
def _pell_count_jit(w, p, thr, mode):
    d = w.shape[0]
    lim0 = _axis_max(0.0, w[0], p, thr)
    if d == 1:
        return _inner(mode, lim0)
    lo = _start(mode, lim0)
    n_first = lim0 - lo + 1
    total = 0
    for i in prange(n_first):
        total += _pell_rest(lo + i, w, p, thr, mode)
    return total


@njit(cache=True)
def _interval_of(n1, n2, b1, b2, p, thr):
    # membership interval in t of the point (n1, n2); returns (ok, lo, hi)
    alpha = _pw(n1 / b1, p)
    beta = _pw(n2 / b2, p)
    if n1 == 0 and n2 == 0:
        return True, -np.inf, np.inf
    if n2 == 0:
        return True, math.log(alpha / thr) / p, np.inf
    if n1 == 0:
        return True, -np.inf, math.log(thr / beta) / p
    disc = thr * thr - 4.0 * alpha * beta
    if disc < 0.0:
        return False, 0.0, 0.0
    s = thr + math.sqrt(disc)
    return True, math.log(2.0 * alpha / s) / p, math.log(s / (2.0 * beta)) / p


@njit(cache=True)
def _interval_scan(b1, b2, p, thr, t_lo, t_hi, mode, lo_out, hi_out, n1_out, n2_out, fill):
    root = thr ** (1.0 / p)
    n1_max = int(math.floor(b1 * math.exp(t_hi) * root)) + 1
    n2_max = int(math.floor(b2 * math.exp(-t_lo) * root)) + 1
    hyper = b1 * b2 * (0.5 * thr) ** (2.0 / p)
    first = 0 if mode == NONNEGATIVE else 1
    k = 0
    for n1 in range(first, n1_max + 1):
        if n1 == 0:
            top = n2_max
        else:
            top = min(n2_max, int(math.floor(hyper / n1)) + 1)
        for n2 in range(first, top + 1):
            ok, lo, hi = _interval_of(n1, n2, b1, b2, p, thr)
            if not ok:
                continue
            lo = max(lo, t_lo)
            hi = min(hi, t_hi)
            if lo > hi:
                continue
            if fill:
                lo_out[k] = lo
                hi_out[k] = hi
                n1_out[k] = n1
                n2_out[k] = n2
            k += 1
    return k


def _pell_intervals_jit(b1, b2, p, thr, t_lo, t_hi, mode):
    """Membership intervals in ``t`` for the 2-D stretch ``diag(e^t, e^-t)``.

    ``b_j = r c_j``.  Returns ``(lo, hi, n1, n2)`` for every point whose
    interval meets ``[t_lo, t_hi]``, clipped to it.
    """
    empty_f, empty_i = np.empty(0), np.empty(0, np.int64)
    size = _interval_scan(b1, b2, p, thr, t_lo, t_hi, mode, empty_f, empty_f, empty_i, empty_i, False)
    lo, hi = np.empty(size), np.empty(size)
    n1, n2 = np.empty(size, np.int64), np.empty(size, np.int64)
    _interval_scan(b1, b2, p, thr, t_lo, t_hi, mode, lo, hi, n1, n2, True)
    return lo, hi, n1, n2


# ---------------------------------------------------------------------------
# numpy

def _axis_max_vec(part, w, p, thr):
    out = np.full(part.shape, -1, dtype=np.int64)
    ok = part <= thr
    if not np.any(ok):
        return out
    pk = part[ok]
    m = np.floor(w * (thr - pk) ** (1.0 / p)).astype(np.int64)
    while True:
        step = pk + ((m + 1) / w) ** p <= thr
        if not step.any():
            break
        m += step
    while True:
        back = (m > 0) & (pk + (m / w) ** p > thr)
        if not back.any():
            break
        m -= back
    out[ok] = m
    return out


def _start_vec(mode, lim):
    if mode == POSITIVE:
        return np.ones_like(lim)
    if mode == NONNEGATIVE:
        return np.zeros_like(lim)
    return -lim


def _inner_vec(mode, m):
    m = np.asarray(m)
    if mode == POSITIVE:
        v = m
    elif mode == NONNEGATIVE:
        v = m + 1
    else:
        v = 2 * m + 1
    return np.where(m < 0, 0, v)


def expand_ranges(starts, lengths):
    """Flattened ``arange(start, start+length)`` for every row, with the row index."""
    lengths = np.maximum(lengths, 0)
    rows = np.repeat(np.arange(lengths.size), lengths)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    return rows, np.repeat(starts, lengths) + offsets


def _pell_count_numpy(w, p, thr, mode):
    d = w.shape[0]
    part = np.zeros(1)
    for k in range(d - 1):
        lim = _axis_max_vec(part, w[k], p, thr)
        start = _start_vec(mode, lim)
        rows, vals = expand_ranges(start, lim - start + 1)
        part = part[rows] + (np.abs(vals) / w[k]) ** p
    m = _axis_max_vec(part, w[d - 1], p, thr)
    return int(_inner_vec(mode, m).sum())


def _pell_intervals_numpy(b1, b2, p, thr, t_lo, t_hi, mode):
    root = thr ** (1.0 / p)
    n1_max = int(math.floor(b1 * math.exp(t_hi) * root)) + 1
    n2_max = int(math.floor(b2 * math.exp(-t_lo) * root)) + 1
    hyper = b1 * b2 * (0.5 * thr) ** (2.0 / p)
    first = 0 if mode == NONNEGATIVE else 1
    n1_axis = np.arange(first, n1_max + 1, dtype=np.int64)
    safe = np.maximum(n1_axis, 1)
    top = np.where(n1_axis == 0, n2_max, np.minimum(n2_max, np.floor(hyper / safe).astype(np.int64) + 1))
    rows, n2 = expand_ranges(np.full(n1_axis.size, first, dtype=np.int64), top - first + 1)
    n1 = n1_axis[rows]
    alpha = (n1 / b1) ** p
    beta = (n2 / b2) ** p
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = thr * thr - 4.0 * alpha * beta
        s = thr + np.sqrt(np.maximum(disc, 0.0))
        lo = np.log(2.0 * alpha / s) / p
        hi = np.log(s / (2.0 * beta)) / p
        lo = np.where(n2 == 0, np.log(alpha / thr) / p, lo)
        hi = np.where(n2 == 0, np.inf, hi)
        lo = np.where(n1 == 0, -np.inf, lo)
        hi = np.where(n1 == 0, np.where(n2 == 0, np.inf, np.log(thr / beta) / p), hi)
    keep = (disc >= 0.0) | (n1 == 0) | (n2 == 0)
    lo = np.maximum(lo, t_lo)
    hi = np.minimum(hi, t_hi)
    keep &= lo <= hi
    return lo[keep], hi[keep], n1[keep], n2[keep]


# ---------------------------------------------------------------------------
# dispatch

def pell_count(w, p, thr, mode, backend=None):
    """Count lattice points of the given mode in the p-ellipsoid with half-widths ``w``."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.size == 0:
        return 1
    backend = backend or _accel.get_backend()
    if backend == "numba":
        return int(_pell_count_jit(w, float(p), float(thr), int(mode)))
    return _pell_count_numpy(w, float(p), float(thr), int(mode))


def pell_intervals(b1, b2, p, thr, t_lo, t_hi, mode, backend=None):
    backend = backend or _accel.get_backend()
    args = (float(b1), float(b2), float(p), float(thr), float(t_lo), float(t_hi), int(mode))
    if backend == "numba":
        return _pell_intervals_jit(*args)
    return _pell_intervals_numpy(*args)
