"""Numba availability and the env switch that turns it off.

Set ``DSRL_DISABLE_NUMBA=1`` to force the pure-numpy kernels.
"""

import os

_FLAG = os.environ.get("DSRL_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and _FLAG not in {"1", "true", "yes", "on"}


def njit(fn):
    """Compile ``fn`` with numba when available, else return None.

    Callers keep a numpy twin for every kernel, so a missing numba
    leaves the jitted slot empty instead of silently running Python loops.
    """
    if not HAVE_NUMBA:
        return None
    return _numba.njit(cache=True, nogil=True)(fn)


def select(numba_impl, numpy_impl):
    return numba_impl if (USE_NUMBA and numba_impl is not None) else numpy_impl


def thread_cap():
    raw = os.environ.get("DSRL_THREADS")
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
