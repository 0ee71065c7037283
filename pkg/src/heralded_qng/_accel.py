"""Backend switch for the hot kernels.

Set ``HERALDED_QNG_DISABLE_NUMBA=1`` to force the pure-numpy code paths.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

NUMBA_DISABLED_ENV = "HERALDED_QNG_DISABLE_NUMBA"


def numba_enabled() -> bool:
    if not _HAVE_NUMBA:
        return False
    return os.environ.get(NUMBA_DISABLED_ENV, "").strip().lower() not in ("1", "true", "yes")


def njit(fn):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if _HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
