"""Selects the gather/scatter kernel backend at import time.

The compiled Cython module is used when it was built; otherwise the numpy
implementation is used.  Setting ``EMGAN_KERNELS=python`` forces the numpy
path (handy for debugging and for the backend benchmark).
"""

import importlib
import os

from . import _pykernels

BACKENDS = ("cython", "python")


def load(name):
    """Return the kernel module for ``name`` ('cython' or 'python')."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("emgan._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    wanted = os.environ.get("EMGAN_KERNELS", "").strip().lower()
    if wanted == "python":
        return "python", _pykernels
    try:
        return "cython", load("cython")
    except ImportError:
        if wanted == "cython":
            raise
        return "python", _pykernels


BACKEND, impl = _select()


def available():
    names = ["python"]
    try:
        load("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names
