"""Selects the smoothing-kernel implementation at import time.

The compiled extension is used when it imports; set ``DRFS_BACKEND=python``
to force the NumPy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

BACKENDS = {"python": _kernels_py}
if _kernels_c is not None:
    BACKENDS["cython"] = _kernels_c


def get_backend(name: str | None = None):
    if name is None:
        name = os.environ.get("DRFS_BACKEND", "cython" if _kernels_c is not None else "python")
    if name not in BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}")
    return BACKENDS[name]


kernels = get_backend()
