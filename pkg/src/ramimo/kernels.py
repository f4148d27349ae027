"""Backend selection for the per-element hot loop.

The compiled extension is used when it imports; setting ``RAMIMO_PURE_PYTHON=1``
forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

python_backend = _kernels_py
compiled_backend = None
if os.environ.get("RAMIMO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = backend.BACKEND


def available_backends() -> dict:
    out = {"python": python_backend}
    if compiled_backend is not None:
        out["cython"] = compiled_backend
    return out
