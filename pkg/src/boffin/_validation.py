"""Input-validation helpers shared across the package."""

import numbers

import numpy as np


def as_float_array(x, name: str, ndim: int | None = None) -> np.ndarray:
    """Convert ``x`` to a float ndarray, rejecting NaN and infinity.

    Args:
        x: Array-like input.
        name: Label used in error messages.
        ndim: Required number of dimensions, or None to accept any.

    Returns:
        A float64 ndarray view or copy of the input.
    """
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_unit_coords(u, dim: int, name: str = "u") -> np.ndarray:
    """Validate unit-hypercube coordinates (a single vector or a row stack).

    Args:
        u: Coordinates of shape (dim,) or (n, dim).
        dim: Expected trailing dimension.
        name: Label used in error messages.

    Returns:
        The validated float array.
    """
    arr = as_float_array(u, name)
    if arr.ndim not in (1, 2) or arr.shape[-1] != dim:
        raise ValueError(f"{name} has shape {arr.shape}, expected trailing dimension {dim}")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} coordinates must lie in [0, 1]")
    return arr


def check_positive_scalar(value, name: str, minimum: float = 0.0, inclusive: bool = False) -> float:
    """Validate a real scalar bounded below, returning it as float."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite")
    if inclusive:
        if value < minimum:
            raise ValueError(f"{name} must be >= {minimum}, got {value}")
    elif value <= minimum:
        raise ValueError(f"{name} must be > {minimum}, got {value}")
    return value


def check_count(value, name: str, minimum: int = 0) -> int:
    """Validate an integer count bounded below, returning it as int."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value
