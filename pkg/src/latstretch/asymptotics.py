"""Two-term lattice-count predictions, error series and cuboid Weyl counts."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .counting import (
    count_all,
    count_hyperplane_union,
    count_nonnegative,
    count_nonzero,
    count_positive,
    count_unnormalised,
)
from .errors import InvalidInputError, PreconditionError
from .geometry import ConvexBody, DiagonalStretch
from .kernels import NONNEGATIVE, POSITIVE

BALANCED_TOL = 1e-6
VARIANTS = ("positive", "nonnegative", "nonzero", "all", "hyperplane")


@dataclass(frozen=True)
class AsymptoticPrediction:
    leading: float
    second: float
    predicted: float
    error_shape: float
    variant: str = "positive"


@dataclass(frozen=True)
class ErrorRow:
    r: float
    exact: int
    predicted: float
    abs_error: float
    normalized: float


def error_shape(a, r, d):
    """``a^{2d/(d+1)} r^{d - 2d/(d+1)}``, the scale of the remainder."""
    q = 2.0 * d / (d + 1)
    return a ** q * r ** (d - q)


def require_balanced(body, tol=BALANCED_TOL):
    for j, s in enumerate(body.cross_sections):
        if abs(s - 1.0) > tol:
            raise PreconditionError(
                f"body is not balanced: cross-section {j} has measure {s!r} (expected 1 within {tol})"
            )


def _stretch(A, d):
    if not isinstance(A, DiagonalStretch):
        A = DiagonalStretch(tuple(A))
    if A.dimension != d:
        raise InvalidInputError(f"stretch has {A.dimension} entries, body has dimension {d}")
    return A.require_unimodular()


def _prediction(body, A, r, scale, sign, variant):
    d = body.dimension
    A = _stretch(A, d)
    if not r > 0:
        raise InvalidInputError(f"r must be positive, got {r!r}")
    leading = scale * body.volume * r ** d
    second = sign * scale * A.tr_inverse * r ** (d - 1)
    return AsymptoticPrediction(leading, second, leading + second, error_shape(A.sup_inverse, r, d), variant)


def predict_positive(body, A, r):
    require_balanced(body)
    return _prediction(body, A, r, 0.5 ** body.dimension, -1.0, "positive")


def predict_nonnegative(body, A, r):
    require_balanced(body)
    A = _stretch(A, body.dimension)
    a, C = A.sup_inverse, body.bounding_constant
    if not 1.0 - 1e-12 <= a <= C * r:
        raise PreconditionError(f"nonnegative expansion needs 1 <= ||A^-1||_inf <= C r, got {a!r} > {C * r!r}")
    return _prediction(body, A, r, 0.5 ** body.dimension, 1.0, "nonnegative")


def predict_nonzero(body, A, r):
    require_balanced(body)
    return _prediction(body, A, r, 1.0, -1.0, "nonzero")


def predict_all(body, A, r):
    """Leading-order count of the full lattice, ``|Ω| r^d``."""
    return _prediction(body, A, r, 1.0, 0.0, "all")


def predict_hyperplane(body, A, r):
    """Points on the coordinate hyperplanes, ``(tr A^{-1}) r^{d-1}``."""
    require_balanced(body)
    d = body.dimension
    A = _stretch(A, d)
    second = A.tr_inverse * r ** (d - 1)
    return AsymptoticPrediction(0.0, second, second, error_shape(A.sup_inverse, r, d), "hyperplane")


_PREDICTORS = {
    "positive": (predict_positive, count_positive),
    "nonnegative": (predict_nonnegative, count_nonnegative),
    "nonzero": (predict_nonzero, count_nonzero),
    "all": (predict_all, count_all),
    "hyperplane": (predict_hyperplane, lambda body, A, r: count_hyperplane_union(body, A, r)[0]),
}


def predict(body, A, r, variant="positive"):
    if variant not in _PREDICTORS:
        raise InvalidInputError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return _PREDICTORS[variant][0](body, A, r)


def measure_error_series(body, A, r_grid, variant="positive"):
    """Exact count against the two-term prediction for every ``r`` in an ascending grid."""
    r_grid = [float(r) for r in r_grid]
    if any(b < a for a, b in zip(r_grid, r_grid[1:])):
        raise InvalidInputError("r grid must be sorted ascending")
    if variant not in _PREDICTORS:
        raise InvalidInputError(f"variant must be one of {VARIANTS}, got {variant!r}")
    predictor, counter = _PREDICTORS[variant]
    rows = []
    for r in r_grid:
        pred = predictor(body, A, r)
        exact = int(counter(body, A, r))
        err = abs(exact - pred.predicted)
        rows.append(ErrorRow(r, exact, pred.predicted, err, err / pred.error_shape))
    return rows


def fit_exponent(x, y):
    """Least-squares slope of ``log|y|`` against ``log x``, skipping zero entries."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    keep = (y > 0) & (x > 0)
    if keep.sum() < 5:
        raise InvalidInputError(f"need at least 5 nonzero rows to fit an exponent, got {int(keep.sum())}")
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def fit_error_exponent(rows):
    return fit_exponent([row.r for row in rows], [row.abs_error for row in rows])


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r", "exact", "predicted", "error", "normalized_error"])
    for row in rows:
        writer.writerow([fmt(row.r), row.exact, fmt(row.predicted), fmt(row.abs_error), fmt(row.normalized)])
    return buf.getvalue()


def fmt(x):
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# Cuboid Weyl counts

def unit_ball_volume(k):
    return math.exp(0.5 * k * math.log(math.pi) - gammaln(0.5 * k + 1.0))


@dataclass(frozen=True)
class WeylCount:
    lam: float
    exact: int
    two_term: float
    boundary: str


def weyl_cuboid_count(side_lengths, lam, boundary="dirichlet"):
    """Laplacian eigenvalues ``<= lam`` on a cuboid, exactly and by the two-term formula.

    Dirichlet eigenvalues ``π² Σ (i_j/a_j)²`` with ``i_j >= 1`` are the positive
    lattice points of the ellipsoid with semi-axes ``a_j`` at ``r = √lam / π``;
    Neumann eigenvalues take ``i_j >= 0``.
    """
    sides = np.asarray(side_lengths, dtype=float)
    if sides.ndim != 1 or sides.size < 1 or np.any(~np.isfinite(sides)) or np.any(sides <= 0):
        raise InvalidInputError(f"side lengths must be positive, got {side_lengths!r}")
    if not (math.isfinite(lam) and lam > 0):
        raise InvalidInputError(f"lambda must be positive, got {lam!r}")
    if boundary not in ("dirichlet", "neumann"):
        raise InvalidInputError(f"boundary must be 'dirichlet' or 'neumann', got {boundary!r}")
    d = sides.size
    r = math.sqrt(lam) / math.pi
    mode = POSITIVE if boundary == "dirichlet" else NONNEGATIVE
    exact = count_unnormalised(ConvexBody.ball(d), sides, r, mode)
    measure = float(np.prod(sides))
    surface = 2.0 * sum(float(np.prod(np.delete(sides, j))) for j in range(d))
    first = unit_ball_volume(d) / (2 * math.pi) ** d * measure * lam ** (d / 2)
    second = unit_ball_volume(d - 1) / (4 * (2 * math.pi) ** (d - 1)) * surface * lam ** ((d - 1) / 2)
    sign = -1.0 if boundary == "dirichlet" else 1.0
    return WeylCount(lam, exact, first + sign * second, boundary)


def amgm_gap(A):
    """``tr A^{-1} - d`` for a determinant-one stretch.

    Evaluated as ``Σ (e^{-t_j} - 1 + t_j)`` with ``t_j = log a_j`` (using
    ``Σ t_j = 0``); each summand is nonnegative, so no cancellation can push
    the result below zero.
    """
    if not isinstance(A, DiagonalStretch):
        A = DiagonalStretch(tuple(A))
    A.require_unimodular()
    return math.fsum(max(0.0, math.expm1(-t) + t) for t in A.log_entries)
