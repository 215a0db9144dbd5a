"""Kernel backend selection.

The compiled extension is preferred when it built; set ``CAPROX_PURE_PYTHON=1``
to force the numpy fallback. ``BACKEND`` reports which one is active.
"""
import os

from . import _fallback

if os.environ.get("CAPROX_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

capped_penalty_sum = _impl.capped_penalty_sum
prox_capped_elementwise = _impl.prox_capped_elementwise
