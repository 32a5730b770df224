"""Numba toggle shared by the hot kernels.

JIT compilation is used whenever numba imports cleanly, unless the
environment variable ``HSFUSE_NO_NUMBA`` is set to a truthy value, in
which case the pure-numpy fallback paths are selected instead.  The
flag is read once at import time; ``benchmarks/bench_kernels.py`` runs
the two configurations in separate processes to compare them.
"""

import os

ENV_FLAG = "HSFUSE_NO_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes")


if _numba_requested():
    try:
        from numba import njit, prange

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    # No-op stand-ins so the kernel modules decorate unconditionally.
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap

    def prange(*args):
        return range(*args)
