"""Kernel backend selection.

Prefers the compiled extension, falls back to numpy. Set CORAX_KERNEL to
``python`` or ``cython`` to force a backend (the benchmark uses this to
compare both on the same interpreter).
"""

import os

from corax import _kernels_py

_forced = os.environ.get("CORAX_KERNEL", "").lower()

if _forced == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from corax import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _kernels_py
        BACKEND = "python"

accumulate_gaussian = _impl.accumulate_gaussian
