"""Kernel dispatch: compiled core when available, numpy fallback otherwise.

Set ``EHRSIG_PURE=1`` to force the fallback (used by the benchmark and by
the backend-equivalence tests).
"""

import os

from . import _pycore

BACKEND = "python"

if os.environ.get("EHRSIG_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pycore
else:
    _impl = _pycore

enet_logistic = _impl.enet_logistic
rash_accumulate = _impl.rash_accumulate

__all__ = ["BACKEND", "enet_logistic", "rash_accumulate"]
