"""Input validation helpers shared by the estimators."""
import numpy as np


def check_positions(r, n_el):
    """Return ``r`` as float64 with shape ``(n_el, 3)`` or ``(batch, n_el, 3)``.

    Flat ``(n_el*3,)`` / ``(batch, n_el*3)`` inputs are reshaped.
    """
    arr = np.asarray(r, dtype=np.float64)
    if arr.ndim == 1 or (arr.ndim == 2 and arr.shape[-1] != 3):
        arr = arr.reshape(arr.shape[:-1] + (-1, 3))
    if arr.ndim not in (2, 3) or arr.shape[-2:] != (n_el, 3):
        raise ValueError(f"expected electron positions of shape (..., {n_el}, 3), got {np.shape(r)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("electron positions must be finite")
    return arr


def check_positive_int(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
