"""Pick the matvec kernel implementation at import time.

Set ``ANNNI_BACKEND=python`` to force the numpy fallback even when the
compiled extension is importable.
"""
import os

from . import _kernels_py

_requested = os.environ.get("ANNNI_BACKEND", "auto").lower()

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _requested == "python" or _compiled is None:
    kernels = _kernels_py
    BACKEND = "python"
else:
    kernels = _compiled
    BACKEND = "compiled"


def get_kernels(name=None):
    """Return the kernel module for ``name`` ("compiled" or "python"), default active."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]
