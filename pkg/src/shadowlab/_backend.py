"""Kernel backend selection.

The compiled extension is used when importable; set ``SHADOWLAB_BACKEND=python``
to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

kernels = _kernels_py
NAME = "python"

if os.environ.get("SHADOWLAB_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        kernels = _compiled
        NAME = "cython"


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return names
    return ["cython", *names]


def get(name=None):
    """Return the kernel module ``name`` (default: the active one)."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
