"""Hot kernels with a compiled backend and a pure-Python fallback.

The Cython extension is used when it was built and imports cleanly; set
``MBRRM_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` reports which
one is active.
"""

from __future__ import annotations

import os

from . import _pykernels

TIE_RTOL = _pykernels.TIE_RTOL

_ck = None
if os.environ.get("MBRRM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _ck  # type: ignore[no-redef]
    except ImportError:
        _ck = None

if _ck is not None:
    BACKEND = "cython"
    hungarian = _ck.hungarian
    best_composition = _ck.best_composition
    best_power_grid = _ck.best_power_grid
    marginal_usc_gains = _ck.marginal_usc_gains
else:
    BACKEND = "python"
    hungarian = _pykernels.hungarian
    best_composition = _pykernels.best_composition
    best_power_grid = _pykernels.best_power_grid
    marginal_usc_gains = _pykernels.marginal_usc_gains

compositions = _pykernels.compositions
simplex_grid = _pykernels.simplex_grid

__all__ = [
    "BACKEND", "TIE_RTOL", "hungarian", "best_composition", "best_power_grid",
    "marginal_usc_gains", "compositions", "simplex_grid",
]
