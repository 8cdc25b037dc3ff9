"""Pick the compiled kernels when importable, else the numpy fallback.

Set ``GRAPHMCMC_PURE=1`` to force the fallback (used by the benchmark and the
backend-equivalence tests).
"""

import os

if os.environ.get("GRAPHMCMC_PURE", "") not in ("", "0"):
    from . import _pure as kernels
    BACKEND = "python"
else:
    try:
        from . import _core as kernels
        BACKEND = "cython"
    except ImportError:
        from . import _pure as kernels
        BACKEND = "python"

nearest = kernels.nearest
owned_by = kernels.owned_by
segment_bounds = kernels.segment_bounds
prim_mst = kernels.prim_mst
