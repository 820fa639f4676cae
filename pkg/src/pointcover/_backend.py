"""Kernel selection: compiled extension if importable, numpy fallback otherwise.

Set ``POINTCOVER_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py


def load(pure=None):
    if pure is None:
        pure = os.environ.get("POINTCOVER_PURE_PYTHON", "") not in ("", "0")
    if not pure:
        try:
            from . import _kernels
            return _kernels
        except ImportError:
            pass
    return _kernels_py


kernels = load()
