"""Branching random electric networks.

Galton--Watson trees whose depth-``d`` edges carry resistance ``m**d * xi``:
exact root-to-level conductances, particle approximations of their law,
small-network oracles and a seeded experiment harness.

Set ``GW_ELECTRIC_THREADS`` before import to cap the number of worker
threads used by the compiled kernels.
"""

import os as _os

_threads = _os.environ.get("GW_ELECTRIC_THREADS")
if _threads:
    _os.environ.setdefault("NUMBA_NUM_THREADS", _threads)
_os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from .errors import *  # noqa: E402,F401,F403
from .laws import (  # noqa: E402
    ExpansionConstants,
    OffspringLaw,
    ResistanceLaw,
    build_offspring_law,
    deterministic,
    dubuc_condition,
    expansion_constants,
    factorial_moment,
    lognormal,
    point_mass,
    two_point,
    uniform,
    w_second_moment,
)

__version__ = "0.1.0"


def set_threads(count: int | None = None) -> int:
    """Cap compiled-kernel parallelism; returns the thread count in effect."""
    import numba

    if count is None:
        env = _os.environ.get("GW_ELECTRIC_THREADS")
        count = int(env) if env else numba.config.NUMBA_NUM_THREADS
    count = max(1, min(int(count), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(count)
    return count
