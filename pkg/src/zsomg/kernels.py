"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``ZSOMG_PURE_PYTHON=1`` to force the numpy implementation.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("ZSOMG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels

separable_min = _impl.separable_min
vertex_max = _impl.vertex_max
l1_rows = _impl.l1_rows
