"""Numba acceleration switch.

Hot kernels (the simulator event loop and the geometric projected-gradient
solver) are written once and either compiled with numba's ``njit`` or run
as-is in pure Python/NumPy. Selection happens at import time:

* ``GCHAIN_DISABLE_NUMBA=1`` forces the pure fallback path.
* ``NUMBA_DISABLE_JIT=1`` (numba's own switch) is respected too.
* A missing numba installation silently falls back.

``GCHAIN_THREADS`` caps worker parallelism for the replication driver.
"""

import os

# the built-in work queue avoids probing optional TBB/OpenMP layers; must be
# set before numba is first imported
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")


def _detect_numba() -> bool:
    if os.environ.get("GCHAIN_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}:
        return False
    if os.environ.get("NUMBA_DISABLE_JIT", "").strip() == "1":
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _detect_numba()

if NUMBA_ENABLED:
    from numba import njit as _njit
    from numba import prange

    def jit_kernel(**options):
        """Decorator: numba-compile a kernel (cached), or leave it alone."""

        def decorate(fn):
            return _njit(cache=True, **options)(fn)

        return decorate

else:
    prange = range

    def jit_kernel(**options):
        def decorate(fn):
            return fn

        return decorate


def apply_thread_cap() -> int:
    """Apply the GCHAIN_THREADS cap to numba's thread pool.

    Returns the number of worker threads in effect (1 on the fallback path,
    which runs replications sequentially).
    """
    if not NUMBA_ENABLED:
        return 1
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    requested = os.environ.get("GCHAIN_THREADS", "").strip()
    threads = limit
    if requested:
        try:
            threads = max(1, min(int(requested), limit))
        except ValueError:
            threads = limit
    numba.set_num_threads(threads)
    return threads
