"""Backend selection for the leapfrog kernels.

The compiled extension is used when it imports; ``WAVEPROBE_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _kernels_py

try:
    if os.environ.get("WAVEPROBE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from ._ext import _ckernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for default)."""
    if name is None:
        name = BACKEND
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {name!r}")
