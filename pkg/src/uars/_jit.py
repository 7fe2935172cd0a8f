"""Numba switch.

Set ``UARS_DISABLE_NUMBA=1`` to route every hot kernel through the pure-numpy
implementations instead of the compiled ones. ``UARS_NUM_THREADS`` caps the
numba thread pool.
"""

import logging
import os

logger = logging.getLogger(__name__)

_FALSY = {"", "0", "false", "no", "off"}

USE_NUMBA = os.environ.get("UARS_DISABLE_NUMBA", "").strip().lower() in _FALSY

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False
    USE_NUMBA = False
    logger.warning("numba not importable; falling back to numpy kernels")


def _null_decorator(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(func):
        return func

    return wrap


if HAVE_NUMBA:
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the TBB layer warns on older system TBB builds; workqueue is always present
        numba.config.THREADING_LAYER = "workqueue"
    njit = numba.njit
    prange = numba.prange
    _threads = os.environ.get("UARS_NUM_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
else:  # pragma: no cover
    njit = _null_decorator
    prange = range


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
