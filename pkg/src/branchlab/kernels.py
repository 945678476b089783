"""Kernel selection.

The compiled extension is used when it imports; otherwise, or when
``BRANCHLAB_PURE=1`` is set, the numpy fallback is used.  Both expose the
same names, so callers only ever import from here.
"""

import os

if os.environ.get("BRANCHLAB_PURE", "") not in ("", "0"):
    from branchlab import _kernels_py as _impl
else:
    try:
        from branchlab import _kernels as _impl
    except ImportError:  # extension not built
        from branchlab import _kernels_py as _impl

BACKEND = _impl.BACKEND
DTYPE = _impl.DTYPE
PcTable = _impl.PcTable
layout_arrays = _impl.layout_arrays
mul = _impl.mul
inv = _impl.inv
power = _impl.power
commutator = _impl.commutator
conjugate = _impl.conjugate
orbit_labels = _impl.orbit_labels
orbit_count = _impl.orbit_count
portrait = _impl.portrait
from_portrait = _impl.from_portrait

__all__ = [
    "BACKEND", "DTYPE", "PcTable", "layout_arrays", "mul", "inv", "power",
    "commutator", "conjugate", "orbit_labels", "orbit_count", "portrait",
    "from_portrait",
]
