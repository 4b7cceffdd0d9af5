"""Input validation helpers used by the public functions and estimators."""

import numbers

import numpy as np

from .exceptions import InvalidArgumentError


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise InvalidArgumentError(f"{name} must be >= 1, got {value}")
    return int(value)


def check_probability(value, name, *, open_interval=False):
    value = float(value)
    if open_interval:
        if not 0.0 < value < 1.0:
            raise InvalidArgumentError(f"{name} must lie in (0, 1), got {value}")
    elif not 0.0 <= value <= 1.0:
        raise InvalidArgumentError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_unit_array(arr, name="samples"):
    """Return ``arr`` as a float or uint8 array with values in [0, 1].

    uint8 arrays are accepted unchanged (interpreted as value / 255).
    """
    arr = np.asarray(arr)
    if arr.dtype == np.uint8:
        return arr
    if arr.dtype == bool:
        return arr.astype(np.float64)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise InvalidArgumentError(f"{name} values must lie in [0, 1]")
    return arr


def check_image_batch(X, *, channels=None):
    """Validate a batch of images shaped (n, h, w[, c]); returns a 4-D array."""
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[..., np.newaxis]
    if X.ndim != 4:
        raise InvalidArgumentError(
            f"expected a batch of images with 3 or 4 dimensions, got shape {X.shape}"
        )
    if X.shape[0] == 0:
        raise InvalidArgumentError("empty image batch")
    if channels is not None and X.shape[-1] != channels:
        raise InvalidArgumentError(
            f"expected {channels} channel(s), got {X.shape[-1]}"
        )
    return check_unit_array(X, "X")


def check_same_shape(a, b, what="inputs"):
    if a.shape != b.shape:
        raise InvalidArgumentError(f"{what} differ in shape: {a.shape} vs {b.shape}")
