"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
is used.  Setting ``THURSTON_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

if os.environ.get("THURSTON_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

polish_roots = _impl.polish_roots
poly_eval = _impl.poly_eval
polygon_test = _impl.polygon_test
greedy_separated = _impl.greedy_separated

__all__ = ["BACKEND", "polish_roots", "poly_eval", "polygon_test", "greedy_separated"]
