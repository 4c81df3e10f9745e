"""Kernel backend selection.

The compiled extension is preferred when it was built; otherwise the numpy
fallback is used.  Set MSE_ADJUST_BACKEND=python or =compiled to force one
(the latter raises if the extension is unavailable).  Results agree across
backends up to floating-point summation order.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_requested = os.environ.get("MSE_ADJUST_BACKEND", "auto").strip().lower() or "auto"
if _requested == "auto":
    _impl = _compiled if _compiled is not None else _kernels_py
elif _requested in ("compiled", "cython"):
    if _compiled is None:
        raise ImportError(
            "MSE_ADJUST_BACKEND=compiled but the extension is not built; "
            "reinstall without MSE_ADJUST_PURE_PYTHON=1"
        )
    _impl = _compiled
elif _requested in ("python", "numpy", "pure"):
    _impl = _kernels_py
else:
    raise ValueError(f"unrecognized MSE_ADJUST_BACKEND value {_requested!r}")

BACKEND = _impl.BACKEND_NAME
ols_tau_rss = _impl.ols_tau_rss
boot_taus = _impl.boot_taus


def available_backends() -> tuple[str, ...]:
    out = ["python"]
    if _compiled is not None:
        out.insert(0, "compiled")
    return tuple(out)
