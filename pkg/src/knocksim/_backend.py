"""Numerical backend selection.

Hot kernels in :mod:`knocksim._kernels` exist in two variants: numba
``@njit``-compiled loops and pure-numpy vectorized fallbacks.  The active
variant is chosen once at import time from the ``KNOCKSIM_BACKEND``
environment variable:

    auto   use numba if importable, else numpy (default)
    numba  require numba, fail loudly if missing
    numpy  force the pure-numpy fallback

The flag selects an execution path only; it carries no simulator
configuration.  Both paths compute the same quantities with the same
operation order wherever float semantics allow, but bit-identical output
across backends is not guaranteed (libm vs SIMD transcendentals may differ
in the last ulp).  Within a fixed backend, all outputs are deterministic.
"""

import os

_VALID = ("auto", "numba", "numpy")

_requested = os.environ.get("KNOCKSIM_BACKEND", "auto").strip().lower()
if _requested not in _VALID:
    raise RuntimeError(
        f"KNOCKSIM_BACKEND must be one of {_VALID}, got {_requested!r}"
    )

NUMBA_AVAILABLE = False
if _requested in ("auto", "numba"):
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:
        if _requested == "numba":
            raise RuntimeError(
                "KNOCKSIM_BACKEND=numba but numba is not importable"
            )

USE_NUMBA = NUMBA_AVAILABLE and _requested in ("auto", "numba")

#: Name of the active backend, for logs / reports / benchmarks.
BACKEND = "numba" if USE_NUMBA else "numpy"
