"""Kernel backend selection.

Imports the compiled extension when present; otherwise falls back to the
NumPy implementation. ``FOVTRACK_PURE_PYTHON=1`` forces the fallback (used by
the kernel benchmark and the parity tests).
"""

from __future__ import annotations

import os

if os.environ.get("FOVTRACK_PURE_PYTHON"):
    from fovtrack import _kernels_np as _impl
else:
    try:
        from fovtrack import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from fovtrack import _kernels_np as _impl

COMPILED: bool = bool(getattr(_impl, "COMPILED", False))

trilinear_batch = _impl.trilinear_batch
field_pose_accumulate = _impl.field_pose_accumulate
raycast_free = _impl.raycast_free
edt_squared = _impl.edt_squared
farthest_point_subsample = _impl.farthest_point_subsample
