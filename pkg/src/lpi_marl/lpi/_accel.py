"""Optional numba compilation of the sequential inner loops."""

from __future__ import annotations

from collections.abc import Callable
from typing import Any, TypeVar

F = TypeVar("F", bound=Callable[..., Any])

# Optional numba import - the loops run as plain Python without it
try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False
    _njit = None


def jit(func: F) -> F:
    """Compile ``func`` in nopython mode when numba is installed."""
    if _njit is None:
        return func
    return _njit(cache=True)(func)  # type: ignore[no-any-return]
