"""Numba/NumPy backend selection for the hot kernels.

Set ``FIBERKEY_DISABLE_NUMBA=1`` to force the pure-NumPy fallback path.
Numba failing to import also falls back silently.  The choice only affects
speed; both paths consume the same pre-drawn random arrays, so results are
identical up to floating-point summation order (integer-counting kernels
are bit-identical).
"""
import os

_TRUTHY = {"1", "true", "yes", "on"}


def numba_disabled_by_env() -> bool:
    return os.environ.get("FIBERKEY_DISABLE_NUMBA", "").strip().lower() in _TRUTHY


NUMBA_ENABLED = False
if not numba_disabled_by_env():
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "numpy"
