"""Numba dispatch.

Hot loops are written once as plain Python over arrays and compiled with
``numba.njit`` when available. Setting ``ONLINEAUG_DISABLE_NUMBA=1`` (or not
having numba installed) routes every kernel to its vectorized numpy twin
instead; both paths are tested for agreement.
"""

import os

_FLAG = os.environ.get("ONLINEAUG_DISABLE_NUMBA", "").strip().lower()

try:
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False
    _njit = None

USE_NUMBA = HAS_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with numba (cached, nogil); return it unchanged otherwise."""
    if not HAS_NUMBA:
        return fn
    return _njit(cache=True, nogil=True)(fn)


def pick(jit_fn, numpy_fn):
    return jit_fn if USE_NUMBA else numpy_fn
