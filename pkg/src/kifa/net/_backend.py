"""Selects the recurrent-core implementation at import time.

The compiled Cython kernels are preferred when the extension built; the
pure-numpy module is the fallback and the reference. Set KIFA_BACKEND to
"python" or "cython" to force a choice (forcing "cython" raises if the
extension is missing).
"""

import os

from . import _core_py

_forced = os.environ.get("KIFA_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _core_py
    BACKEND = "python"
else:
    try:
        from . import _core_cy as _impl
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _core_py
        BACKEND = "python"

recurrent_forward = _impl.recurrent_forward
recurrent_backward = _impl.recurrent_backward
