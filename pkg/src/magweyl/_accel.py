"""Optional numba acceleration.

Set ``MAGWEYL_DISABLE_NUMBA=1`` before import to force the pure-numpy paths.
"""
import os

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

_DISABLED = os.environ.get("MAGWEYL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

NUMBA_ENABLED = _HAVE_NUMBA and not _DISABLED

if NUMBA_ENABLED and "NUMBA_THREADING_LAYER" not in os.environ:
    # the portable layer; avoids noisy warnings about old TBB installs
    numba.config.THREADING_LAYER = "workqueue"


def optional_njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    def decorator(func):
        if NUMBA_ENABLED:
            return numba.njit(*args, **kwargs)(func)
        return func
    return decorator


# numba only recognises its own prange object inside jitted code
prange = numba.prange if NUMBA_ENABLED else range
