"""Optional numba acceleration.

Hot numeric kernels are written as plain numpy/math functions and wrapped
with :func:`maybe_jit`.  Setting the environment variable
``MTBOUNDS_NO_NUMBA=1`` (or running without numba installed) selects the
pure-python/numpy fallback path; the two paths share one source of truth.
"""

import os

NUMBA_DISABLED = os.environ.get("MTBOUNDS_NO_NUMBA", "").strip() in ("1", "true", "yes")

if not NUMBA_DISABLED:
    try:
        import numba

        def maybe_jit(*args, **kwargs):
            kwargs.setdefault("cache", True)
            return numba.njit(*args, **kwargs)

        using_numba = True
    except ImportError:  # pragma: no cover
        NUMBA_DISABLED = True

if NUMBA_DISABLED:
    using_numba = False

    def maybe_jit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
