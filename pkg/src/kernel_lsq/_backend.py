"""Select the compiled or pure-numpy inner loops.

The compiled extension is used when it imports; otherwise the numpy
versions are used. :func:`use` switches at runtime (tests and the
benchmark exercise both).
"""
import numpy as np

from . import _purekernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_IMPLS = {"python": _purekernels}
if _ckernels is not None:
    _IMPLS["compiled"] = _ckernels

_active = _IMPLS.get("compiled", _purekernels)


def available():
    """Names of the usable backends."""
    return sorted(_IMPLS)


def current():
    """Name of the active backend."""
    return "compiled" if _active is _ckernels and _ckernels is not None else "python"


def use(name):
    """Activate backend ``name`` ("compiled" or "python"); returns the previous name."""
    global _active
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} unavailable; have {available()}")
    previous = current()
    _active = _IMPLS[name]
    return previous


def _c2(a):
    return np.ascontiguousarray(np.atleast_2d(a), dtype=np.float64)


def zonal_table_matrix(X, Y, coef):
    return _active.zonal_table_matrix(_c2(X), _c2(Y), np.ascontiguousarray(coef, dtype=np.float64))


def surface_spline_matrix(X, Y, power, log_branch):
    return _active.surface_spline_matrix(_c2(X), _c2(Y), float(power), bool(log_branch))


def legendre_clenshaw(c, t):
    t = np.asarray(t, dtype=np.float64)
    flat = np.ascontiguousarray(t.ravel())
    out = _active.legendre_clenshaw(np.ascontiguousarray(c, dtype=np.float64), flat)
    return np.asarray(out).reshape(t.shape)
