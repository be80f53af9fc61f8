"""Backend selection for the hot kernels.

Numba is used when importable unless ``POT1D_DISABLE_NUMBA`` is set to a
truthy value, in which case every kernel runs on its pure-numpy path.
"""
import os

_FLAG = os.environ.get("POT1D_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba ships with the test env
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is importable.

    The returned object is always callable; without numba it is ``fn``.
    """
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=False, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
