"""
Backend selection for the numeric kernels.

The kernels in :mod:`treespace._kernels` are compiled with numba when it is
available; setting ``TREESPACE_BACKEND=numpy`` forces the interpreted
fallback (same code, no compilation).  The choice is made once at import.
"""

from ._kernels import BACKEND, USE_NUMBA

__all__ = ["BACKEND", "USE_NUMBA", "backend_name"]


def backend_name() -> str:
    """Name of the active kernel backend: 'numba' or 'numpy'."""
    return BACKEND
