"""Mollified lattice counts by Poisson summation, with sandwich and decay checks.

Fourier convention: ``f̂(ξ) = ∫ f(x) e^{-2πi x·ξ} dx``.  For the body
``A(rΩ)`` smoothed by ``φ_{A,δ}(x) = δ^{-d} φ(A^{-1}x/δ)`` (``det A = 1``),
Poisson summation gives

    Σ_n (χ_{A,r} * φ_{A,δ})(n) = Σ_n r^d χ̂(rAn) φ̂(δAn).

Only ellipsoids are supported, since their indicator transforms are Bessel
functions in closed form.  Transforms are real and even, so the lattice sum
runs over the nonnegative orthant with multiplicity ``2^{#nonzero coords}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import j0, j1, spherical_jn

from .counting import count_all
from .errors import InvalidInputError, PreconditionError, TooLargeError
from .geometry import ConvexBody, DiagonalStretch
from .kernels import expand_ranges

SUPPORTED_DIMENSIONS = (2, 3)
BUMP = "compact-bump"
GAUSSIAN = "gaussian"
TABLE_MAX = 32.0
TABLE_STEP = 1.0 / 512
QUAD_NODES = 800
DIRECT_NODES = 4000
DECAY_HEADROOM = 2.0
SANDWICH_GUARD = 1e-9
TAIL_TARGET = 1e-2
MAX_TERMS = 5 * 10 ** 7
CHUNK = 1 << 20


def _check_dimension(d):
    if d not in SUPPORTED_DIMENSIONS:
        raise NotImplementedError(f"indicator transforms are implemented for d in {SUPPORTED_DIMENSIONS}, got {d}")


def _sphere_area(d):
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_indicator_ft(d, xi):
    """Transform of the unit-ball indicator, ``|ξ|^{-d/2} J_{d/2}(2π|ξ|)``.

    ``xi`` has shape ``(..., d)``; the value at 0 is the ball volume.
    """
    _check_dimension(d)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1:] != (d,):
        raise InvalidInputError(f"frequency must have {d} coordinates, got shape {xi.shape}")
    return _radial_ball_ft(d, np.linalg.norm(xi, axis=-1))


def _radial_ball_ft(d, rho):
    rho = np.asarray(rho, dtype=float)
    zero = rho == 0.0
    safe = np.where(zero, 1.0, rho)
    if d == 2:
        out = j1(2.0 * math.pi * safe) / safe
        return np.where(zero, math.pi, out)
    # J_{3/2}(x) = sqrt(2x/π) j_1(x), so ρ^{-3/2} J_{3/2}(2πρ) = 2 j_1(2πρ) / ρ
    out = 2.0 * spherical_jn(1, 2.0 * math.pi * safe) / safe
    return np.where(zero, 4.0 * math.pi / 3.0, out)


# ---------------------------------------------------------------------------
# bodies

@dataclass(frozen=True, eq=False)
class SpectralBody:
    """An ellipsoid ``E·B`` with its closed-form indicator transform."""

    body: ConvexBody
    _decay: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        b = self.body
        if not (b.is_p_ellipsoid and b.p == 2.0):
            raise InvalidInputError("spectral bodies must be ellipsoids (p = 2)")
        _check_dimension(b.dimension)

    @property
    def dimension(self):
        return self.body.dimension

    @property
    def axes(self):
        return np.asarray(self.body.semi_axes)

    @property
    def volume(self):
        return self.body.volume

    @property
    def sandwich_constant(self):
        return self.body.sandwich_constant

    def transform(self, xi):
        """``χ̂_Ω(ξ) = det(E) χ̂_B(Eξ)`` for ``ξ`` of shape ``(..., d)``."""
        xi = np.asarray(xi, dtype=float)
        return float(np.prod(self.axes)) * ball_indicator_ft(self.dimension, xi * self.axes)

    def radial_transform(self, rho, direction):
        u = np.asarray(direction, dtype=float)
        return self.transform(np.multiply.outer(np.asarray(rho, dtype=float), u / np.linalg.norm(u)))

    @property
    def decay_constant(self):
        """Measured ``M`` with ``|χ̂(ξ)| <= M |ξ|^{-(d+1)/2}`` on ``|ξ| >= 1``, with 2x headroom."""
        if not self._decay:
            shells = np.logspace(0.0, 3.0, 400)
            self._decay.append(DECAY_HEADROOM * decay_check(self, shells, 64))
        return self._decay[0]


def as_spectral(body):
    return body if isinstance(body, SpectralBody) else SpectralBody(body)


def _directions(d, count):
    if d == 2:
        theta = (np.arange(count) + 0.5) * (2.0 * math.pi / count)
        return np.column_stack([np.cos(theta), np.sin(theta)])
    # Fibonacci lattice on the sphere
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    s = np.sqrt(1.0 - z * z)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def decay_check(body, shells, samples_per_shell=64):
    """Max of ``|ξ|^{(d+1)/2} |χ̂(ξ)|`` over ``samples_per_shell`` directions on each shell."""
    sb = as_spectral(body)
    shells = np.asarray(shells, dtype=float).ravel()
    if shells.size == 0 or np.any(shells < 1.0) or np.any(shells > 1e3):
        raise InvalidInputError("shells must be nonempty and lie in [1, 1000]")
    if samples_per_shell < 1:
        raise InvalidInputError("need at least one sample per shell")
    d = sb.dimension
    U = _directions(d, int(samples_per_shell))
    Xi = shells[:, None, None] * U[None, :, :]
    vals = np.abs(sb.transform(Xi)) * shells[:, None] ** ((d + 1) / 2.0)
    return float(vals.max())


# ---------------------------------------------------------------------------
# mollifiers

def _bump_profile(s):
    s = np.asarray(s, dtype=float)
    inside = s < 1.0
    out = np.zeros_like(s)
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _bump_raw_ft(d, rho, nodes):
    """Unnormalised radial transform of ``exp(-1/(1-|x|^2))`` on the unit ball."""
    s, w = _gauss_legendre(nodes)
    prof = _bump_profile(s) * w
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty(rho.size)
    step = max(1, 4_000_000 // nodes)
    for i in range(0, rho.size, step):
        arg = 2.0 * math.pi * np.multiply.outer(rho[i:i + step], s)
        if d == 2:
            kernel = 2.0 * math.pi * s * j0(arg)
        else:
            kernel = 4.0 * math.pi * s * s * np.sinc(arg / math.pi)
        out[i:i + step] = kernel @ prof
    return out


@lru_cache(maxsize=None)
def _bump_table(d):
    grid = np.arange(0.0, TABLE_MAX + 0.5 * TABLE_STEP, TABLE_STEP)
    raw = _bump_raw_ft(d, grid, QUAD_NODES)
    norm = raw[0]
    values = raw / norm
    spline = CubicSpline(grid, values)
    # decreasing envelope sup_{s >= ρ} |φ̂(s)| on the grid, plus a polynomial
    # tail constant P with |φ̂(ρ)| <= P ρ^-4 measured on [1, TABLE_MAX]
    env = np.maximum.accumulate(np.abs(values)[::-1])[::-1]
    far = grid >= 1.0
    poly = float(np.max(np.abs(values[far]) * grid[far] ** 4))
    return grid, values, spline, env, poly, norm


def _bump_second_moment(d):
    s, w = _gauss_legendre(QUAD_NODES)
    prof = _bump_profile(s) * w
    return float(np.sum(prof * s ** (d + 1)) / np.sum(prof * s ** (d - 1)))


@dataclass(frozen=True)
class Mollifier:
    """A radial mollifier of width ``delta`` in ``dimension`` dimensions.

    ``compact-bump`` is the normalised ``exp(-1/(1-|x|^2))`` on the unit ball,
    whose transform is tabulated once by Gauss-Legendre quadrature and
    spline-interpolated.  ``gaussian`` has the same second moment and a
    closed-form transform, but no compact support.
    """

    delta: float
    kind: str = BUMP
    dimension: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise InvalidInputError(f"mollifier width must be positive, got {self.delta!r}")
        if self.kind not in (BUMP, GAUSSIAN):
            raise InvalidInputError(f"mollifier kind must be {BUMP!r} or {GAUSSIAN!r}, got {self.kind!r}")
        _check_dimension(self.dimension)

    @property
    def compact(self):
        return self.kind == BUMP

    @property
    def sigma2(self):
        return _bump_second_moment(self.dimension) / self.dimension

    def density(self, X):
        """``φ(x)`` at unit width for ``X`` of shape ``(..., d)``."""
        rho = np.linalg.norm(np.asarray(X, dtype=float), axis=-1)
        d = self.dimension
        if self.kind == GAUSSIAN:
            s2 = self.sigma2
            return np.exp(-0.5 * rho ** 2 / s2) / (2.0 * math.pi * s2) ** (d / 2)
        return _bump_profile(rho) / _bump_table(d)[5]

    def profile_ft(self, rho):
        """``φ̂`` at unit width as a function of ``|ξ|``."""
        rho = np.abs(np.asarray(rho, dtype=float))
        if self.kind == GAUSSIAN:
            return np.exp(-2.0 * math.pi ** 2 * self.sigma2 * rho ** 2)
        grid, _, spline, _, _, norm = _bump_table(self.dimension)
        out = np.asarray(spline(np.minimum(rho, TABLE_MAX)), dtype=float)
        far = rho > TABLE_MAX
        if np.any(far):
            out = np.where(far, 0.0, out)
            out[far] = _bump_raw_ft(self.dimension, rho[far], DIRECT_NODES) / norm
        return out

    def transform(self, xi):
        """``φ̂_δ(ξ) = φ̂(δξ)``."""
        return self.profile_ft(self.delta * np.linalg.norm(np.asarray(xi, dtype=float), axis=-1))

    def envelope_segments(self):
        """``(grid, env, P)``: ``|φ̂(ρ)| <= env[i]`` for ``ρ >= grid[i]`` and ``<= P ρ^-4`` past the grid.

        Both carry 2x headroom against between-node peaks.
        """
        if self.kind == GAUSSIAN:
            grid = np.arange(0.0, TABLE_MAX + 0.5 * TABLE_STEP, TABLE_STEP)
            env = self.profile_ft(grid)
            far = grid >= 1.0
            return grid, env, float(np.max(env[far] * grid[far] ** 4))
        grid, _, _, env, poly, _ = _bump_table(self.dimension)
        return grid, DECAY_HEADROOM * env, DECAY_HEADROOM * poly


# ---------------------------------------------------------------------------
# lattice sums

def _orthant_points(halfwidths, start=0):
    """Nonnegative lattice points of the ellipsoid ``Σ (n_j/h_j)^2 <= 1``, in chunks."""
    d = halfwidths.size
    first = np.arange(0, int(math.floor(halfwidths[0])) + 1, dtype=np.int64)
    step = max(1, CHUNK // (int(np.prod(halfwidths[1:] + 1.0)) + 1))
    for i in range(0, first.size, step):
        pts = first[i:i + step][:, None]
        part = (pts[:, 0] / halfwidths[0]) ** 2
        for k in range(1, d):
            lim = np.floor(halfwidths[k] * np.sqrt(np.maximum(1.0 - part, 0.0))).astype(np.int64)
            lim = np.where(part > 1.0, -1, lim)
            rows, vals = expand_ranges(np.zeros_like(lim), lim + 1)
            pts = np.column_stack([pts[rows], vals])
            part = part[rows] + (vals / halfwidths[k]) ** 2
        yield pts


def _orthant_size(K, a):
    d = a.size
    return (math.pi ** (d / 2) / math.gamma(d / 2 + 1)) * K ** d / 2 ** d + K ** (d - 1) * d


def _check_stretch(A, d):
    if not isinstance(A, DiagonalStretch):
        A = DiagonalStretch(tuple(A))
    if A.dimension != d:
        raise InvalidInputError(f"stretch has {A.dimension} entries, body has dimension {d}")
    return A.require_unimodular()


def _cell_radius(a):
    return 0.5 * float(np.linalg.norm(a))


def truncation_bound(body, A, r, mollifier, K):
    """Bound on ``Σ_{|An| > K} r^d |χ̂(rAn)| |φ̂(δAn)|`` by comparison with an integral.

    Each point ``m = An`` owns the cell ``m + A[-1/2, 1/2]^d``, whose points lie
    within ``ρ_A = |diag A|/2`` of ``m``.  With ``f`` a decreasing majorant of
    the summand in ``|m|``, the tail is at most
    ``ω ∫_{K-2ρ_A}^∞ f(u) (u + ρ_A)^{d-1} du``.
    """
    sb = as_spectral(body)
    d = sb.dimension
    a = _check_stretch(A, d).array
    rho_a = _cell_radius(a)
    u0 = K - 2.0 * rho_a
    if u0 <= 0.0 or r * u0 < 1.0:
        return math.inf
    M = sb.decay_constant
    coef = _sphere_area(d) * r ** d * M * r ** (-(d + 1) / 2.0)
    delta = mollifier.delta
    grid, env, poly = mollifier.envelope_segments()

    def antiderivative(u):
        # ∫ (u + ρ)^{d-1} u^{-(d+1)/2} du
        if d == 2:
            return 2.0 * np.sqrt(u) - 2.0 * rho_a / np.sqrt(u)
        return u + 2.0 * rho_a * np.log(u) - rho_a ** 2 / u

    # segments of constant envelope, in u = ρ/δ
    edges = grid / delta
    i0 = max(int(np.searchsorted(edges, u0, side="right")) - 1, 0)
    lo = np.concatenate([[u0], edges[i0 + 1:]])
    hi = np.concatenate([edges[i0 + 1:], [grid[-1] / delta]])
    keep = hi > lo
    total = float(np.sum(env[i0:][keep] * (antiderivative(hi[keep]) - antiderivative(lo[keep]))))
    U = max(u0, grid[-1] / delta)

    def far(u):
        return poly * (delta * u) ** -4.0 * (u + rho_a) ** (d - 1) * u ** (-(d + 1) / 2.0)

    tail, _ = integrate.quad(far, U, math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return coef * (total + 2.0 * tail)


def choose_truncation(body, A, r, mollifier, target=TAIL_TARGET, max_terms=MAX_TERMS):
    """Smallest ``K`` on a geometric ladder whose tail bound is below ``target``."""
    sb = as_spectral(body)
    a = _check_stretch(A, sb.dimension).array
    K = max(4.0 * _cell_radius(a) + 2.0 / r, 1.0)
    while True:
        if truncation_bound(sb, A, r, mollifier, K) <= target:
            return K
        if _orthant_size(1.25 * K, a) > max_terms:
            return K
        K *= 1.25


def mollified_count(body, A, r, mollifier, K=None):
    """``(Σ_{|An| <= K} r^d χ̂(rAn) φ̂(δAn), tail bound)``."""
    sb = as_spectral(body)
    d = sb.dimension
    A = _check_stretch(A, d)
    if not (math.isfinite(r) and r > 0):
        raise InvalidInputError(f"r must be positive, got {r!r}")
    if mollifier.dimension != d:
        raise InvalidInputError("mollifier dimension does not match body")
    c = sb.sandwich_constant
    if not mollifier.delta < r / (1.0 + c):
        raise PreconditionError(
            f"mollifier width {mollifier.delta!r} must be below r/(1+c) = {r / (1.0 + c)!r} "
            "for the sandwich bounds to hold"
        )
    return _lattice_sum(sb, A, r, mollifier, K)


def _lattice_sum(sb, A, r, mollifier, K):
    d = sb.dimension
    if K is None:
        K = choose_truncation(sb, A, r, mollifier)
    if not K >= 1.0:
        raise InvalidInputError(f"truncation radius must be >= 1, got {K!r}")
    a = A.array
    if _orthant_size(K, a) > 4 * MAX_TERMS:
        raise TooLargeError(f"truncation radius {K} needs more than {4 * MAX_TERMS} lattice terms")
    partial = []
    scale = r ** d
    for pts in _orthant_points(K / a):
        xi = pts * a
        weight = 2.0 ** np.count_nonzero(pts, axis=1)
        terms = weight * scale * sb.transform(r * xi) * mollifier.transform(xi)
        partial.append(float(np.sum(terms)))
    value = math.fsum(partial)
    return value, truncation_bound(sb, A, r, mollifier, K)


def default_delta(a, r, d):
    """Width balancing smoothing error and lattice-sum error: ``a^{2d/(d+1)} r^{-(d-1)/(d+1)}``."""
    return a ** (2.0 * d / (d + 1)) * r ** (-(d - 1.0) / (d + 1))


@dataclass(frozen=True)
class SandwichResult:
    r: float
    delta: float
    lower: float
    exact: int
    upper: float
    passed: bool
    truncation_bound: float
    K: float

    def as_dict(self):
        return {
            "r": self.r,
            "delta": self.delta,
            "lower": self.lower,
            "exact": self.exact,
            "upper": self.upper,
            "pass": self.passed,
            "truncation_bound": self.truncation_bound,
        }


def sandwich_check(body, A, r, delta, K=None, kind=BUMP):
    """Pin ``count_all`` between mollified counts at ``r ∓ cδ`` with ``c = 1/inradius``."""
    if kind != BUMP:
        raise InvalidInputError("the sandwich bounds need a compactly supported mollifier")
    sb = as_spectral(body)
    d = sb.dimension
    A = _check_stretch(A, d)
    c = sb.sandwich_constant
    if not (math.isfinite(delta) and 0 < delta <= r / (1.0 + c)):
        raise PreconditionError(
            f"mollifier width {delta!r} must lie in (0, r/(1+c)] = (0, {r / (1.0 + c)!r}] for the sandwich bounds"
        )
    moll = Mollifier(delta, BUMP, d)
    r_lo, r_hi = r - c * delta, r + c * delta
    if K is None:
        K = max(choose_truncation(sb, A, r_lo, moll), choose_truncation(sb, A, r_hi, moll))
    lo_val, lo_tail = _lattice_sum(sb, A, r_lo, moll, K)
    hi_val, hi_tail = _lattice_sum(sb, A, r_hi, moll, K)
    exact = count_all(sb.body, A, r)
    lower, upper = lo_val - lo_tail, hi_val + hi_tail
    guard = SANDWICH_GUARD * max(1.0, abs(exact))
    passed = lower - guard <= exact <= upper + guard
    return SandwichResult(r, delta, lower, exact, upper, bool(passed), max(lo_tail, hi_tail), K)
