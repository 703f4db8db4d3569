"""Select the kernel implementation at import time.

The compiled extension is preferred; ``TOPOMAP_PURE=1`` forces the
pure-Python fallback (useful for benchmarking and for cross-checking).
"""

import os

from . import _pykernels

if os.environ.get("TOPOMAP_PURE", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        kernels = _pykernels

BACKEND = kernels.NAME
CascadeOverflow = (kernels.CascadeOverflow, _pykernels.CascadeOverflow)


def get_kernels(name=None):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
