"""Principal-axis line and plane fits for point clouds.

Used to diagnose degenerate training geometry: base translations or predicted
positions collapsing onto a line, and trajectories confined to a plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_finite_vector, stack_vectors

# Singular values closer than this (relative to the largest) are treated as tied.
_TIE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class LineFit:
    anchor: np.ndarray
    direction: np.ndarray
    rms_residual: float
    inlier_fraction: float

    def __post_init__(self):
        object.__setattr__(self, "anchor", as_finite_vector(self.anchor, 3, "anchor"))
        direction = as_finite_vector(self.direction, 3, "direction")
        if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
            raise ValueError("direction must be a unit vector")
        object.__setattr__(self, "direction", direction)


@dataclass(frozen=True, eq=False)
class PlaneFit:
    anchor: np.ndarray
    normal: np.ndarray
    rms_residual: float
    inlier_fraction: float

    def __post_init__(self):
        object.__setattr__(self, "anchor", as_finite_vector(self.anchor, 3, "anchor"))
        normal = as_finite_vector(self.normal, 3, "normal")
        if abs(np.linalg.norm(normal) - 1.0) > 1e-9:
            raise ValueError("normal must be a unit vector")
        object.__setattr__(self, "normal", normal)


def _canonical_axis(axis: np.ndarray) -> np.ndarray:
    for component in axis:
        if component != 0.0:
            return axis if component > 0.0 else -axis
    return axis


def _pick_axis(axes: np.ndarray, singular_values: np.ndarray, which: str) -> np.ndarray:
    """Select the requested principal axis, breaking spectral ties by choosing
    the axis whose absolute component vector is lexicographically largest."""
    scale = max(float(singular_values[0]), 1e-300)
    if which == "largest":
        tied = np.nonzero(singular_values >= singular_values[0] - _TIE_RTOL * scale)[0]
    else:
        tied = np.nonzero(singular_values <= singular_values[-1] + _TIE_RTOL * scale)[0]
    best = max((tuple(np.abs(axes[i])), i) for i in tied)
    return _canonical_axis(axes[best[1]].copy())


def _decompose(points_arr: np.ndarray):
    centroid = points_arr.mean(axis=0)
    centered = points_arr - centroid
    if not np.any(np.abs(centered) > 0.0):
        raise ValueError("degenerate point set")
    _, singular_values, axes = np.linalg.svd(centered, full_matrices=True)
    return centroid, centered, singular_values, axes


def fit_line(points, inlier_tol: float) -> LineFit:
    """Least-squares line through the centroid along the principal axis."""
    points_arr = stack_vectors(points, 3, "points")
    if points_arr.shape[0] < 2:
        raise ValueError("need at least 2 points")
    centroid, centered, singular_values, axes = _decompose(points_arr)
    direction = _pick_axis(axes, singular_values, "largest")
    offsets = centered - np.outer(centered @ direction, direction)
    distances = np.linalg.norm(offsets, axis=1)
    return LineFit(centroid, direction,
                   rms_residual=float(np.sqrt(np.mean(distances ** 2))),
                   inlier_fraction=float(np.mean(distances <= inlier_tol)))


def fit_plane(points, inlier_tol: float) -> PlaneFit:
    """Least-squares plane through the centroid with the smallest principal
    axis as normal."""
    points_arr = stack_vectors(points, 3, "points")
    if points_arr.shape[0] < 2:
        raise ValueError("need at least 2 points")
    centroid, centered, singular_values, axes = _decompose(points_arr)
    normal = _pick_axis(axes, singular_values, "smallest")
    distances = np.abs(centered @ normal)
    return PlaneFit(centroid, normal,
                    rms_residual=float(np.sqrt(np.mean(distances ** 2))),
                    inlier_fraction=float(np.mean(distances <= inlier_tol)))
