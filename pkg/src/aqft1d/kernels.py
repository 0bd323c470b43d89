"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python twin.  Setting ``AQFT1D_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and not os.environ.get("AQFT1D_PURE_PYTHON"):
    _impl = _ckernels
    BACKEND = "cython"
else:
    _impl = _kernels_py
    BACKEND = "python"

adaptive_simpson = _impl.adaptive_simpson
normal_order = _impl.normal_order


def backends():
    """Map backend name to kernel module for every backend available here."""
    out = {"python": _kernels_py}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out
