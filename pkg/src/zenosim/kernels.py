"""Backend selection for the aggregation kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``ZENOSIM_PURE_PYTHON`` is set to a non-empty value,
the numpy fallback is used.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("ZENOSIM_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        pass

mean_rows = _impl.mean_rows
coordinate_median = _impl.coordinate_median
pairwise_sq_dists = _impl.pairwise_sq_dists
krum_scores = _impl.krum_scores
sq_norms = _impl.sq_norms

__all__ = ["BACKEND", "mean_rows", "coordinate_median", "pairwise_sq_dists", "krum_scores", "sq_norms"]
