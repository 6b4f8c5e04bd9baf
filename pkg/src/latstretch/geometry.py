"""Coordinate-symmetric convex bodies given by their gauge (Minkowski functional).

Two kinds of body are supported.  A *p-ellipsoid* ``{x : sum |x_j/c_j|^p <= 1}``
has closed forms for everything below.  A *generic gauge* wraps a vectorised
callable ``evaluator(X) -> gauge values`` for ``X`` of shape ``(m, d)``; its
measures come from nested adaptive quadrature.  Every body must be
unconditional (invariant under coordinate sign flips) because lattice
enumeration only walks the nonnegative orthant.  Smoothness and curvature
hypotheses of the asymptotic results are the caller's responsibility for
generic gauges; among built-in bodies they hold strictly for ``p = 2``.

Axis indices are 0-based throughout.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .errors import InvalidBodyError, InvalidInputError, NumericFailureError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

# Lattice membership uses gauge <= 1 + BOUNDARY_TOL so that integer points on
# the boundary are not lost to binary rounding.
BOUNDARY_TOL = 1e-12
BISECTION_TOL = 1e-12
BALANCE_TOL = 1e-9
UNIMODULAR_RTOL = 1e-12
QUAD_RTOL = 1e-8

P_ELLIPSOID = "p-ellipsoid"
GENERIC = "generic-gauge"


def pball_volume(d, p):
    """Volume of the unit p-ball in R^d: 2^d Γ(1+1/p)^d / Γ(1+d/p)."""
    if d == 0:
        return 1.0
    return math.exp(d * math.log(2.0) + d * gammaln(1.0 + 1.0 / p) - gammaln(1.0 + d / p))


@dataclass(frozen=True)
class DiagonalStretch:
    """Positive diagonal matrix ``diag(a_1, ..., a_d)``."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(float(a) for a in self.entries)
        if len(entries) == 0:
            raise InvalidInputError("a stretch needs at least one entry")
        for a in entries:
            if not math.isfinite(a) or a <= 0.0:
                raise InvalidInputError(f"stretch entries must be positive and finite, got {a!r}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def identity(cls, d):
        return cls((1.0,) * d)

    @classmethod
    def from_log(cls, t):
        return cls(tuple(math.exp(float(v)) for v in t))

    @property
    def dimension(self):
        return len(self.entries)

    @property
    def array(self):
        return np.asarray(self.entries, dtype=float)

    @property
    def det(self):
        return math.prod(self.entries)

    @property
    def tr_inverse(self):
        return math.fsum(1.0 / a for a in self.entries)

    @property
    def sup_inverse(self):
        """``a = ||A^{-1}||_inf``."""
        return max(1.0 / a for a in self.entries)

    @property
    def log_entries(self):
        return tuple(math.log(a) for a in self.entries)

    def deviation(self):
        """``||A - Id||_inf``."""
        return max(abs(a - 1.0) for a in self.entries)

    def is_unimodular(self, rtol=UNIMODULAR_RTOL):
        # the sum of logs is better conditioned than the product for skewed entries
        return abs(math.fsum(self.log_entries)) <= rtol * self.dimension

    def require_unimodular(self, rtol=UNIMODULAR_RTOL):
        if not self.is_unimodular(rtol):
            raise InvalidInputError(
                f"stretch must have determinant 1, got det = {self.det!r} for entries {self.entries}"
            )
        return self

    def inverse(self):
        return DiagonalStretch(tuple(1.0 / a for a in self.entries))

    def permuted(self, order):
        return DiagonalStretch(tuple(self.entries[i] for i in order))


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """An unconditional convex body with geometric constants cached at construction."""

    dimension: int
    kind: str
    p: Optional[float] = None
    semi_axes: Optional[tuple] = None
    evaluator: Optional[Callable] = field(default=None, repr=False)
    name: str = ""
    volume: float = field(init=False)
    cross_sections: tuple = field(init=False)
    axis_extents: tuple = field(init=False)
    inradius: float = field(init=False)
    bounding_constant: float = field(init=False)

    def __post_init__(self):
        d = int(self.dimension)
        if d < 1:
            raise InvalidBodyError(f"dimension must be positive, got {self.dimension!r}")
        object.__setattr__(self, "dimension", d)
        if self.kind == P_ELLIPSOID:
            p = float(self.p) if self.p is not None else float("nan")
            if not (math.isfinite(p) and p > 1.0):
                raise InvalidBodyError(f"p-ellipsoid exponent must be a finite real > 1, got {self.p!r}")
            axes = tuple(float(c) for c in (self.semi_axes or ()))
            if len(axes) != d:
                raise InvalidBodyError(f"expected {d} semi_axes, got {len(axes)}")
            if any(not math.isfinite(c) or c <= 0.0 for c in axes):
                raise InvalidBodyError(f"semi_axes must be positive and finite, got {axes}")
            object.__setattr__(self, "p", p)
            object.__setattr__(self, "semi_axes", axes)
        elif self.kind == GENERIC:
            if not callable(self.evaluator):
                raise InvalidBodyError("a generic-gauge body needs a callable evaluator")
        else:
            raise InvalidBodyError(f"unknown body kind {self.kind!r}")

        extents = tuple(float(v) for v in _axis_extents_of(self))
        if any(not (math.isfinite(e) and e > 0.0) for e in extents):
            raise InvalidBodyError(f"degenerate body: axis extents {extents}")
        object.__setattr__(self, "axis_extents", extents)
        object.__setattr__(self, "volume", _volume_of(self))
        object.__setattr__(self, "cross_sections", tuple(_cross_section_of(self, j) for j in range(d)))
        object.__setattr__(self, "inradius", _inradius_of(self))
        object.__setattr__(self, "bounding_constant", max(extents))

    # constructors -------------------------------------------------------

    @classmethod
    def p_ellipsoid(cls, p, semi_axes, name=""):
        return cls(dimension=len(semi_axes), kind=P_ELLIPSOID, p=p, semi_axes=tuple(semi_axes), name=name)

    @classmethod
    def ball(cls, d, radius=1.0):
        return cls.p_ellipsoid(2.0, (radius,) * d)

    @classmethod
    def from_gauge(cls, dimension, evaluator, name=""):
        return cls(dimension=dimension, kind=GENERIC, evaluator=evaluator, name=name)

    # queries ------------------------------------------------------------

    @property
    def is_p_ellipsoid(self):
        return self.kind == P_ELLIPSOID

    @property
    def sandwich_constant(self):
        """``c = 1 / inradius``, the dilation constant of the mollifier sandwich."""
        return 1.0 / self.inradius

    def gauge_values(self, X):
        X = np.asarray(X, dtype=float)
        if self.kind == P_ELLIPSOID:
            c = np.asarray(self.semi_axes)
            return np.sum(np.abs(X / c) ** self.p, axis=-1) ** (1.0 / self.p)
        flat = X.reshape(-1, self.dimension)
        return np.asarray(self.evaluator(flat), dtype=float).reshape(X.shape[:-1])

    def stretched(self, B):
        """The body ``B·Ω`` for a positive diagonal ``B``."""
        b = np.asarray(B.entries if isinstance(B, DiagonalStretch) else B, dtype=float)
        if b.shape != (self.dimension,):
            raise InvalidInputError("stretch dimension does not match body")
        if self.kind == P_ELLIPSOID:
            return ConvexBody.p_ellipsoid(self.p, tuple(b * np.asarray(self.semi_axes)), name=self.name)
        inner = self.evaluator
        return ConvexBody.from_gauge(self.dimension, lambda X: inner(np.asarray(X) / b), name=self.name)

    def section(self, keep):
        """The body ``Ω ∩ {x_j = 0 for j not in keep}`` as a body in ``len(keep)`` dimensions."""
        keep = tuple(int(k) for k in keep)
        if self.kind == P_ELLIPSOID:
            return ConvexBody.p_ellipsoid(self.p, tuple(self.semi_axes[k] for k in keep), name=self.name)
        d, inner = self.dimension, self.evaluator

        def embedded(Y):
            Y = np.asarray(Y, dtype=float).reshape(-1, len(keep))
            X = np.zeros((Y.shape[0], d))
            X[:, keep] = Y
            return inner(X)

        return ConvexBody.from_gauge(len(keep), embedded, name=self.name)

    def to_spec(self):
        if self.kind != P_ELLIPSOID:
            raise InvalidBodyError("generic gauges are registered in code and cannot be serialised")
        return {"dimension": self.dimension, "kind": P_ELLIPSOID, "p": self.p, "semi_axes": list(self.semi_axes)}


# ---------------------------------------------------------------------------
# Module-level operations

def _finite_point(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (d,):
        raise InvalidInputError(f"expected points with {d} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("point has non-finite coordinates")
    return x


def gauge(body, x):
    """Minkowski functional of ``body`` at ``x`` (single point or ``(..., d)`` array)."""
    x = _finite_point(x, body.dimension)
    value = body.gauge_values(x)
    return float(value) if np.ndim(value) == 0 else value


def _stretch_array(A, d):
    a = np.asarray(A.entries if isinstance(A, DiagonalStretch) else A, dtype=float)
    if a.shape != (d,):
        raise InvalidInputError(f"stretch has {a.size} entries, body has dimension {d}")
    return a


def lattice_member(body, a, r, N):
    """Boolean membership of the rows of ``N`` in ``A(rΩ)`` (closed, boundary-guarded).

    This is the single predicate shared by every counter and the brute-force
    oracle, so all of them make identical boundary decisions.
    """
    N = np.asarray(N, dtype=float)
    if body.kind == P_ELLIPSOID:
        w = pell_scale(body, a, r)
        s = np.zeros(N.shape[:-1])
        for j in range(body.dimension):
            s = s + (np.abs(N[..., j]) / w[j]) ** body.p
        return s <= pell_threshold(body.p)
    return body.gauge_values(N / (np.asarray(a) * r)) <= 1.0 + BOUNDARY_TOL


def pell_scale(body, a, r):
    """Per-axis half-widths ``a_j r c_j`` of the stretched p-ellipsoid."""
    return np.asarray(a, dtype=float) * r * np.asarray(body.semi_axes, dtype=float)


def pell_threshold(p):
    return (1.0 + BOUNDARY_TOL) ** p


def contains(body, A, r, x):
    """Whether ``x`` lies in the closed body ``A(rΩ)``."""
    if not (r > 0 and math.isfinite(r)):
        raise InvalidInputError(f"r must be positive, got {r!r}")
    a = _stretch_array(A, body.dimension)
    x = _finite_point(x, body.dimension)
    result = lattice_member(body, a, r, x)
    return bool(result) if np.ndim(result) == 0 else result


def volume(body):
    return body.volume


def cross_section_measure(body, j):
    """(d-1)-dimensional measure of ``Ω ∩ {x_j = 0}`` (``j`` is 0-based)."""
    if not 0 <= j < body.dimension:
        raise InvalidInputError(f"axis index {j} out of range for dimension {body.dimension}")
    return body.cross_sections[j]


def axis_extent(body, fixed_prefix, k):
    """Largest ``t >= 0`` with ``gauge(prefix, t, 0, ..., 0) <= 1``, by bisection.

    ``fixed_prefix`` holds coordinates ``0..k-1``; a 2-D array of prefixes is
    handled in one vectorised bisection.  Returns 0 for prefixes outside Ω.
    """
    d = body.dimension
    if not 0 <= k < d:
        raise InvalidInputError(f"axis index {k} out of range for dimension {d}")
    prefix = np.asarray(fixed_prefix, dtype=float)
    single = prefix.ndim <= 1
    prefix = prefix.reshape(1, 0) if k == 0 and prefix.size == 0 and single else prefix.reshape(-1, k)
    if not np.all(np.isfinite(prefix)):
        raise InvalidInputError("prefix has non-finite coordinates")
    m = prefix.shape[0]
    X = np.zeros((m, d))
    X[:, :k] = prefix
    result = extent_bisect(body.gauge_values, X, k, body.axis_extents[k], level=1.0)
    return float(result[0]) if single else result


def extent_bisect(gauge_values, X, k, upper, level=1.0):
    """Vectorised bisection for the largest ``t`` in ``[0, upper]`` with
    ``gauge(X with column k = t) <= level``; rows already outside give 0.

    ``X`` is modified in place (column ``k``).
    """
    m = X.shape[0]
    X[:, k] = 0.0
    inside = gauge_values(X) <= level
    lo = np.zeros(m)
    hi = np.full(m, float(upper))
    # upper bracket from orthant monotonicity: gauge(prefix, t, 0) >= t * gauge(e_k)
    while np.max(hi - lo, initial=0.0) > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        X[:, k] = mid
        ok = gauge_values(X) <= level
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return np.where(inside, lo, 0.0)


def balanced_representative(body):
    """Return ``(B, BΩ)`` with every coordinate cross-section of ``BΩ`` of measure 1.

    Solved in log space: with ``S = -(Σ log|Ω_j|)/(d-1)``, ``log b_j = S + log|Ω_j|``.
    ``B`` is not normalised to determinant 1.
    """
    d = body.dimension
    if d < 2:
        raise InvalidBodyError("balancing needs dimension >= 2")
    sections = np.asarray(body.cross_sections, dtype=float)
    bad = [j for j, s in enumerate(sections) if not (math.isfinite(s) and s > 0.0)]
    if bad:
        raise InvalidBodyError(f"cross-section {bad[0]} has non-positive measure {sections[bad[0]]!r}")
    logs = np.log(sections)
    S = -math.fsum(logs) / (d - 1)
    B = DiagonalStretch(tuple(np.exp(S + logs)))
    return B, body.stretched(B)


def is_balanced(body, tol=BALANCE_TOL):
    return all(abs(s - 1.0) <= tol for s in body.cross_sections)


def body_constants(body):
    """``(inradius, C)`` with ``Ω ⊂ [-C, C]^d``; the sandwich constant is ``1/inradius``."""
    return body.inradius, body.bounding_constant


# ---------------------------------------------------------------------------
# Construction-time computations

def _axis_extents_of(body):
    d = body.dimension
    if body.kind == P_ELLIPSOID:
        return body.semi_axes
    eye = np.eye(d)
    g = np.asarray(body.evaluator(eye), dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise InvalidBodyError(f"gauge must be positive on the coordinate axes, got {g}")
    return tuple(1.0 / g)


def _volume_of(body):
    d = body.dimension
    if body.kind == P_ELLIPSOID:
        return math.prod(body.semi_axes) * pball_volume(d, body.p)
    return 2.0 ** d * _orthant_integral(body, np.zeros(0))


def _cross_section_of(body, j):
    d = body.dimension
    if d == 1:
        return 1.0
    keep = [k for k in range(d) if k != j]
    if body.kind == P_ELLIPSOID:
        axes = [body.semi_axes[k] for k in keep]
        return math.prod(axes) * pball_volume(d - 1, body.p)
    return body.section(keep).volume


def _orthant_integral(body, prefix):
    """Measure of the nonnegative part of the slice of Ω through ``prefix``."""
    d, k = body.dimension, prefix.size
    top = axis_extent(body, prefix, k) if k else body.axis_extents[0]
    if k == d - 1:
        return float(top)
    if top <= 0.0:
        return 0.0

    def inner(t):
        return _orthant_integral(body, np.append(prefix, t))

    value, abserr = integrate.quad(inner, 0.0, top, epsabs=0.0, epsrel=QUAD_RTOL * 1e-2, limit=200)
    if abserr > QUAD_RTOL * max(abs(value), 1e-300):
        raise NumericFailureError(
            f"volume quadrature did not converge (relative error {abserr / max(abs(value), 1e-300):.3g})",
            achieved_tolerance=abserr,
        )
    return value


def _inradius_of(body):
    d = body.dimension
    if d == 1:
        return body.axis_extents[0]
    if body.kind == P_ELLIPSOID and body.p >= 2.0:
        # ||u/c||_p <= ||u/c||_2 <= 1/min c for p >= 2, so the axes are extremal
        return min(body.semi_axes)
    return 1.0 / _max_gauge_on_sphere(body)


def _max_gauge_on_sphere(body, n_samples=4096, seed=0):
    d = body.dimension

    def g(u):
        u = np.abs(np.asarray(u, dtype=float))
        return float(body.gauge_values(u / np.linalg.norm(u)))

    if d == 2:
        theta = np.linspace(0.0, 0.5 * math.pi, n_samples + 1)
        U = np.column_stack([np.cos(theta), np.sin(theta)])
        vals = body.gauge_values(U)
        i = int(np.argmax(vals))
        lo, hi = theta[max(i - 1, 0)], theta[min(i + 1, n_samples)]
        res = optimize.minimize_scalar(
            lambda th: -g((math.cos(th), math.sin(th))), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12},
        )
        return max(float(vals[i]), -float(res.fun))

    rng = np.random.default_rng(seed)
    U = np.abs(rng.standard_normal((n_samples * d, d)))
    U = np.vstack([U, np.eye(d), np.ones((1, d))])
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    vals = body.gauge_values(U)
    best = float(vals.max())
    for i in np.argsort(vals)[-4:]:
        res = optimize.minimize(lambda u: -g(u), U[i], method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        best = max(best, -float(res.fun))
    return best


# ---------------------------------------------------------------------------
# Body specification files

_SPEC_KEYS = ("dimension", "kind", "p", "semi_axes")


def body_from_spec(spec):
    """Build a body from ``{"dimension", "kind", "p", "semi_axes"}``; errors name the key."""
    if not isinstance(spec, dict):
        raise InvalidBodyError("body specification must be a mapping")
    for key in spec:
        if key not in _SPEC_KEYS:
            raise InvalidBodyError(f"unknown key {key!r} in body specification")
    for key in _SPEC_KEYS:
        if key not in spec:
            raise InvalidBodyError(f"missing key {key!r} in body specification")
    if spec["kind"] != P_ELLIPSOID:
        raise InvalidBodyError(f"key 'kind': only {P_ELLIPSOID!r} bodies are file-loadable, got {spec['kind']!r}")
    d = spec["dimension"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise InvalidBodyError(f"key 'dimension' must be an integer >= 2, got {d!r}")
    axes = spec["semi_axes"]
    if not isinstance(axes, (list, tuple)) or len(axes) != d:
        raise InvalidBodyError(f"key 'semi_axes' must be a list of {d} numbers")
    try:
        axes = tuple(float(c) for c in axes)
        p = float(spec["p"])
    except (TypeError, ValueError) as exc:
        raise InvalidBodyError(f"key 'semi_axes'/'p' is not numeric: {exc}") from None
    if not p > 1.0:
        raise InvalidBodyError(f"key 'p' must be > 1, got {p!r}")
    if any(not c > 0 for c in axes):
        raise InvalidBodyError(f"key 'semi_axes' must be positive, got {axes}")
    return ConvexBody.p_ellipsoid(p, axes)


def load_body(path):
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            spec = tomllib.loads(text)
        else:
            spec = json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise InvalidBodyError(f"cannot parse body file {path}: {exc}") from None
    return body_from_spec(spec)
