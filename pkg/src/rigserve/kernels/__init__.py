"""Hot-path pose kernels with a compiled core and a pure NumPy fallback.

The compiled extension (Cython) is preferred when importable; the fallback
is selected otherwise.  RIGSERVE_KERNELS=pure|native forces a backend,
which the benchmark uses to compare the two.  Both backends are bit-exact
twins, so the choice never changes composed frames.
"""

from __future__ import annotations

import os

_requested = os.environ.get("RIGSERVE_KERNELS", "auto")

if _requested == "pure":
    from rigserve.kernels import _pure as _impl
elif _requested == "native":
    from rigserve.kernels import _speed as _impl  # type: ignore[no-redef]
else:
    try:
        from rigserve.kernels import _speed as _impl  # type: ignore[no-redef]
    except ImportError:
        from rigserve.kernels import _pure as _impl

BACKEND: str = _impl.BACKEND
add_offsets = _impl.add_offsets
wrap_angles = _impl.wrap_angles
ema_blend = _impl.ema_blend

__all__ = ["BACKEND", "add_offsets", "wrap_angles", "ema_blend"]
