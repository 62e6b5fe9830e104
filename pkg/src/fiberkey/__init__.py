"""Desk-scale simulator and security analyzer for key establishment over a
mode-scrambling multimode fiber via wavefront shaping."""

__version__ = "0.1.0"

from ._backend import BACKEND, NUMBA_ENABLED  # noqa: F401
