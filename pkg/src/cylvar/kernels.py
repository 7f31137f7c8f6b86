"""Kernel backend selection.

The compiled extension ``cylvar._kernels`` is used when it was built; otherwise
the numpy implementation in ``cylvar._kernels_py`` is used. Setting
``CYLVAR_PURE=1`` forces the numpy path.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("CYLVAR_PURE") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def trilinear(values, lo, h, pts):
    """Trilinear interpolation of node ``values`` (n, n, n, C) at ``pts`` (P, 3)."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 3)
    return _impl.trilinear(values, float(lo), float(h), pts)


def rotate_pullback(values, lo, h, alpha):
    """Nodewise ``g^T V(g x)`` for the rotation by ``alpha`` about the x3-axis."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    return _impl.rotate_pullback(values, float(lo), float(h), float(alpha))
