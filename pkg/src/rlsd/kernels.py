"""Backend selection for the elementwise kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
is used. Setting ``RLSD_PURE_PYTHON=1`` in the environment forces the fallback.
Callers must go through attribute access on this module (``kernels.clamp``)
so that :func:`set_backend` takes effect everywhere.
"""

import importlib
import os

from . import _kernels_py

KIND_ZERO = _kernels_py.KIND_ZERO
KIND_L1 = _kernels_py.KIND_L1
KIND_SQUARED_L2 = _kernels_py.KIND_SQUARED_L2

_EXPORTS = ("soft_threshold", "clamp", "prox_separable", "canonical_x3_dual", "apg_diag")


def _load(name):
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("rlsd._kernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        _load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def backend_module(name):
    """Return the kernel module for ``name`` ('cython' or 'python')."""
    return _load(name)


def set_backend(name):
    global BACKEND
    mod = _load(name)
    g = globals()
    for fn in _EXPORTS:
        g[fn] = getattr(mod, fn)
    BACKEND = name


BACKEND = "python"
if os.environ.get("RLSD_PURE_PYTHON", "") not in ("", "0"):
    set_backend("python")
else:
    try:
        set_backend("cython")
    except ImportError:
        set_backend("python")
