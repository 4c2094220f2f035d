"""Numba switch.

The jitted kernels are used whenever numba imports.  Set
``VERIFIEDPH_PURE_NUMPY=1`` to route every call through the numpy
implementations instead; both stay importable so they can be benchmarked
against each other.
"""

import os

NUMBA_OPTS = {"cache": True, "nogil": True}

try:  # pragma: no cover - depends on the environment
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("VERIFIEDPH_PURE_NUMPY", "").strip().lower() not in {
    "1",
    "true",
    "yes",
    "on",
}


def njit(func):
    """``numba.njit`` with the package options; identity without numba."""
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(func, **NUMBA_OPTS)
