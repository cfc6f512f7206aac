"""Kernel backend selection: numba-jitted hot loops with a pure-numpy fallback.

The MLP forward/backward kernels dominate runtime (pretraining batches and
per-node rollout evaluations), so they are compiled with numba by default.
Set ``TMPO_KERNELS=numpy`` before import to force the plain numpy path, e.g.
when debugging or on a machine where numba is unavailable. The two paths run
the same source; ``benchmarks/bench_kernels.py`` times them against each other.
"""

from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None
    HAVE_NUMBA = False

_REQUESTED = os.environ.get("TMPO_KERNELS", "numba").strip().lower()
if _REQUESTED not in ("numba", "numpy"):
    raise ValueError(f"TMPO_KERNELS must be 'numba' or 'numpy', got {_REQUESTED!r}")

USE_NUMBA = HAVE_NUMBA and _REQUESTED == "numba"


def jit_kernel(fn):
    """Compile ``fn`` with numba when the numba backend is active.

    The original python function stays reachable as ``fn.py_func`` on the
    compiled version, which is what the kernel benchmark compares against.
    """
    if USE_NUMBA:
        return numba.njit(cache=True, fastmath=False)(fn)
    return fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
