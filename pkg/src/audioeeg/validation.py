"""Input checking helpers shared across the package."""

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class NumericError(RuntimeError):
    """Raised when a computation is numerically unsalvageable."""


def require(condition, message, exc=ValidationError):
    if not condition:
        raise exc(message)


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")


def as_matrix(x, name="X", dtype=np.float64):
    """Coerce to a finite 2-D float array, copying only if needed."""
    out = np.asarray(x, dtype=dtype)
    require(out.ndim == 2, f"{name} must be 2-D, got shape {out.shape}")
    check_finite(out, name)
    return out


def as_vector(x, name="x", dtype=np.float64):
    out = np.asarray(x, dtype=dtype)
    require(out.ndim == 1, f"{name} must be 1-D, got shape {out.shape}")
    check_finite(out, name)
    return out
