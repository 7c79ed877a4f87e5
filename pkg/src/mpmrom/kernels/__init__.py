"""Kernel backend selection.

The compiled extension is used when it imported cleanly; the numpy
reference otherwise.  Set MPMROM_BACKEND=numpy to force the fallback or
MPMROM_BACKEND=compiled to require the extension.
"""

from __future__ import annotations

import importlib
import os

from . import reference

_requested = os.environ.get("MPMROM_BACKEND", "").strip().lower()

_compiled = None
if _requested != "numpy":
    try:
        _compiled = importlib.import_module("mpmrom.kernels._core")
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "MPMROM_BACKEND=compiled but the mpmrom.kernels._core extension is not built"
            )

if _compiled is not None:
    _impl = _compiled
    _backend = "compiled"
else:
    _impl = reference
    _backend = "numpy"


def backend() -> str:
    """Name of the active kernel backend: 'compiled' or 'numpy'."""
    return _backend


p2g = _impl.p2g
g2p = _impl.g2p
interpolate = reference.interpolate  # cheap gather, numpy is fine
mlp_forward = _impl.mlp_forward
mlp_jacobian_cols = _impl.mlp_jacobian_cols
mlp_tangent = _impl.mlp_tangent

__all__ = [
    "backend",
    "p2g",
    "g2p",
    "interpolate",
    "mlp_forward",
    "mlp_jacobian_cols",
    "mlp_tangent",
    "reference",
]
