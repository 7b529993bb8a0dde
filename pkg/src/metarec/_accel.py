"""Numba availability switch.

Set ``METAREC_DISABLE_NUMBA=1`` to force the pure-numpy kernels. Both paths
produce bit-identical results; the flag only changes speed.
"""

from __future__ import annotations

import os

_FLAG = "METAREC_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    Kernels are always compiled if numba exists so the benchmark and the
    equivalence tests can call both variants regardless of ``USE_NUMBA``.
    """
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
