"""JIT switch.

Hot kernels are compiled with numba when it is importable and the
``SYMSORT_DISABLE_JIT`` environment variable is unset (or ``0``). Otherwise
the vectorized numpy implementations in :mod:`symsort.kernels._numpy` are
used. The flag is read once, at import time.
"""

import os

_flag = os.environ.get("SYMSORT_DISABLE_JIT", "0").strip().lower()
DISABLE_JIT = _flag not in ("", "0", "false", "no")

try:
    import numba

    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

JIT_ENABLED = HAS_NUMBA and not DISABLE_JIT
