"""Kernel backend selection.

Hot loops are written once as plain Python over numpy arrays and compiled with
numba when it is importable.  Each kernel module also carries a vectorised
numpy implementation; which one runs is chosen by ``LATSTRETCH_BACKEND``
(``numba`` or ``numpy``) or at runtime with :func:`set_backend`.
"""
import os
import warnings

try:
    import numba
    HAVE_NUMBA = True
    # old system TBB; numba falls back to another layer but warns on every process
    warnings.filterwarnings("ignore", message="The TBB threading layer requires")
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def _nop_decorator(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorator(func):
        return func
    return decorator


if HAVE_NUMBA:
    njit = numba.njit
    prange = numba.prange
else:  # pragma: no cover
    njit = _nop_decorator
    prange = range


def _initial_backend():
    requested = os.environ.get("LATSTRETCH_BACKEND", "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(f"LATSTRETCH_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        warnings.warn("numba is not installed; using the numpy backend")
        return "numpy"
    return requested


_backend = _initial_backend()


def get_backend():
    return _backend


def set_backend(name):
    """Switch kernels between ``"numba"`` and ``"numpy"``; returns the previous name."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    previous, _backend = _backend, name
    return previous


def set_threads(n):
    """Cap the numba thread pool.  Results never depend on the thread count."""
    if n is None or not HAVE_NUMBA:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)


def threads_from_env():
    value = os.environ.get("LATSTRETCH_THREADS")
    return int(value) if value else None
