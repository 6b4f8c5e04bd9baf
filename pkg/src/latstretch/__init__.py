"""Lattice points in stretched convex bodies: exact counts, two-term asymptotics,
optimal determinant-one stretches and a mollified Poisson-summation counter."""
from ._accel import get_backend, set_backend, set_threads
from .asymptotics import (
    AsymptoticPrediction,
    amgm_gap,
    fit_error_exponent,
    measure_error_series,
    predict,
    predict_nonnegative,
    predict_nonzero,
    predict_positive,
    weyl_cuboid_count,
)
from .counting import (
    LatticeCountReport,
    brute_force_count,
    count_all,
    count_hyperplane_union,
    count_nonnegative,
    count_nonzero,
    count_positive,
    count_report,
)
from .errors import (
    InvalidBodyError,
    InvalidInputError,
    LatstretchError,
    NumericFailureError,
    OracleTooLargeError,
    PreconditionError,
    TooLargeError,
)
from .geometry import (
    ConvexBody,
    DiagonalStretch,
    axis_extent,
    balanced_representative,
    body_constants,
    contains,
    cross_section_measure,
    gauge,
    load_body,
    volume,
)
from .optimizer import OptimizationResult, convergence_sweep, optimize_d2_exact, optimize_general

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
