"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_finite_vector(values, size: int, name: str) -> np.ndarray:
    """Copy to a float vector of the given length, rejecting NaN/inf."""
    arr = np.array(values, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"{name} must be a length-{size} vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def as_finite_matrix(values, name: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Copy to a finite 2-D float array, optionally checking the exact shape."""
    arr = np.array(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got ndim {arr.ndim}")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def stack_vectors(items, size: int | None, name: str) -> np.ndarray:
    """Stack a nonempty sequence of equal-length vectors into an (m, d) array."""
    rows = [np.asarray(v, dtype=float).reshape(-1) for v in items]
    if not rows:
        raise ValueError(f"{name} must not be empty")
    dim = rows[0].size if size is None else size
    for i, row in enumerate(rows):
        if row.size != dim:
            raise ValueError(f"{name}[{i}] has length {row.size}, expected {dim}")
    arr = np.stack(rows)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr
