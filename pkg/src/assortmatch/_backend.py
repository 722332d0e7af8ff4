"""Kernel backend selection.

The compiled extension is used when it imports cleanly, unless the
``ASSORTMATCH_BACKEND`` environment variable is set to ``python``.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("ASSORTMATCH_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def get_kernels(name=None):
    """Return the kernel module for ``name`` ("cython", "python" or None for the default)."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def lse_rows(S, v):
    return _impl.lse_rows(np.ascontiguousarray(S, dtype=np.float64), np.ascontiguousarray(v, dtype=np.float64))


def lse_cols(S, u):
    return _impl.lse_cols(np.ascontiguousarray(S, dtype=np.float64), np.ascontiguousarray(u, dtype=np.float64))


def score_batch(D, offset, thetas):
    return _impl.score_batch(
        np.ascontiguousarray(D, dtype=np.float64),
        np.ascontiguousarray(offset, dtype=np.float64),
        np.ascontiguousarray(np.atleast_2d(thetas), dtype=np.float64),
    )
