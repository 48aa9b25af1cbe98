"""Backend selection for the activation jet kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation. Set ``WAVEPINN_KERNELS=numpy`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "numpy"
_impl = _kernels_py

if os.environ.get("WAVEPINN_KERNELS", "").lower() != "numpy":
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name: str | None = None):
    """Kernel module for ``name`` (``"numpy"``, ``"cython"``) or the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def jet_forward(fam, order, Z, coef, nd, pi, pj, slots):
    return _impl.jet_forward(fam, order, Z, coef, nd, pi, pj, slots)


def jet_backward(Z, D, S, Abar, nd, pi, pj):
    return _impl.jet_backward(Z, D, S, Abar, nd, pi, pj)
