"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The Cython extension is picked at import time when present; set
HOROLAB_PURE=1 to force the fallback.  Both backends are bit-compatible,
so results never depend on which one is active.
"""

import os

from . import _pure

if os.environ.get("HOROLAB_PURE"):
    _impl = _pure
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _pure

BACKEND = _impl.BACKEND

expand_reduced_words = _impl.expand_reduced_words
greedy_cover = _impl.greedy_cover
containment_counts = _impl.containment_counts
walk_stats = _impl.walk_stats
displacement_grid = _impl.displacement_grid
