"""Select the DBM kernel backend at import time.

The compiled extension is used when it was built; otherwise the pure-Python
module is used. Set ``LIFTEX_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _dbm_py

INF = _dbm_py.INF

try:
    if os.environ.get("LIFTEX_PURE_PYTHON"):
        raise ImportError("pure python requested")
    from . import _dbm_c as _compiled
except ImportError:
    _compiled = None

close = _dbm_py.close
tighten = _dbm_py.tighten
BACKEND = "python"


def available():
    names = ["python"]
    if _compiled is not None:
        names.append("cython")
    return names


def set_backend(name):
    """Switch the kernels used by the constraint module."""
    global close, tighten, BACKEND
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        close, tighten = _compiled.close, _compiled.tighten
    elif name == "python":
        close, tighten = _dbm_py.close, _dbm_py.tighten
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name


if _compiled is not None:
    set_backend("cython")
