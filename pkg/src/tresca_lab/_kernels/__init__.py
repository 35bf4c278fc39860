"""Kernel selection: the compiled core when importable, else the Python fallback.

Set ``TRESCA_LAB_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("TRESCA_LAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

p1_triplets = _impl.p1_triplets
cd_sweep = _impl.cd_sweep

__all__ = ["BACKEND", "p1_triplets", "cd_sweep"]
