"""Optional numba acceleration.

Hot kernels are written twice: an explicit-loop version that numba compiles,
and a vectorised numpy version used when numba is missing or disabled.
Set ``GVGMATCH_DISABLE_NUMBA=1`` before import to force the numpy path.
"""

import os

_FLAG = os.environ.get("GVGMATCH_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and not DISABLED_BY_ENV


def jit(fn=None, **options):
    """Compile ``fn`` in nopython mode when numba is enabled, else return it as is.

    Usable bare (``@jit``) or with numba options (``@jit(fastmath=...)``).
    """
    if fn is None:
        return lambda f: jit(f, **options)
    if not NUMBA_ENABLED:
        return fn
    return numba.njit(cache=True, nogil=True, **options)(fn)


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
