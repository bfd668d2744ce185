"""
Numba switch.

Hot loops live in ``_kernels`` in two flavours: an ``@njit`` version and a
vectorised numpy version.  The numba path is used when numba imports and
``TWDLASSO_DISABLE_NUMBA`` is unset (or ``0``).
"""
import os
import warnings

_flag = os.environ.get("TWDLASSO_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f

    if not DISABLED_BY_ENV:
        warnings.warn("numba is not installed - falling back to numpy kernels")

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
