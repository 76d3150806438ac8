"""Structure-based localization: pinhole projection, a three-point minimal
solver, robust pose estimation over 2D-3D correspondences, and nonlinear
reprojection refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .poses import (Pose, quaternion_from_axis_angle, quaternion_from_matrix,
                    quaternion_multiply, rotation_matrix)
from .validation import as_finite_vector

MIN_DEPTH = 1e-9
MIN_INLIERS = 4


class DegenerateMinimalSetError(ValueError):
    """Raised for collinear 3D points or coincident rays in a minimal sample."""


class LocalizationFailedError(RuntimeError):
    """Raised when robust estimation cannot find enough consistent matches."""


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole parameters in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True, eq=False)
class Correspondence:
    """A 2D pixel observation of a known 3D point (pixels / meters)."""

    pixel: np.ndarray
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixel", as_finite_vector(self.pixel, 2, "pixel"))
        object.__setattr__(self, "point", as_finite_vector(self.point, 3, "point"))


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold: float = 4.0
    confidence: float = 0.9999
    max_iterations: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.inlier_threshold <= 0.0:
            raise ValueError("inlier_threshold must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def project(pose: Pose, intr: Intrinsics, point) -> tuple[np.ndarray, bool]:
    """Pinhole projection of a world point; the flag is False behind the camera.

    The camera model is `x_cam = R(q) @ (X - c)` with the pixel at
    (fx * x/z + cx, fy * y/z + cy).
    """
    point = as_finite_vector(point, 3, "point")
    cam = rotation_matrix(pose.orientation) @ (point - pose.position)
    if cam[2] <= MIN_DEPTH:
        return np.zeros(2), False
    return np.array([intr.fx * cam[0] / cam[2] + intr.cx,
                     intr.fy * cam[1] / cam[2] + intr.cy]), True


def project_points(pose: Pose, intr: Intrinsics, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection: (m, 2) pixels and the (m,) array of depths."""
    cam = (np.asarray(points, dtype=float) - pose.position) @ rotation_matrix(pose.orientation).T
    depths = cam[:, 2]
    safe = np.where(np.abs(depths) < 1e-300, 1.0, depths)
    pixels = np.stack([intr.fx * cam[:, 0] / safe + intr.cx,
                       intr.fy * cam[:, 1] / safe + intr.cy], axis=1)
    return pixels, depths


def _bearing(intr: Intrinsics, pixel: np.ndarray) -> np.ndarray:
    ray = np.array([(pixel[0] - intr.cx) / intr.fx, (pixel[1] - intr.cy) / intr.fy, 1.0])
    return ray / np.linalg.norm(ray)


def _polish_depths(depths: np.ndarray, cosines: np.ndarray, sides_sq: np.ndarray) -> np.ndarray:
    """Newton iterations on the three pairwise-distance constraints."""
    cos_a, cos_b, cos_c = cosines
    for _ in range(10):
        s1, s2, s3 = depths
        residual = np.array([
            s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * cos_a - sides_sq[0],
            s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cos_b - sides_sq[1],
            s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cos_c - sides_sq[2],
        ])
        if np.max(np.abs(residual)) < 1e-14 * max(1.0, sides_sq.max()):
            break
        jac = np.array([
            [0.0, 2.0 * s2 - 2.0 * s3 * cos_a, 2.0 * s3 - 2.0 * s2 * cos_a],
            [2.0 * s1 - 2.0 * s3 * cos_b, 0.0, 2.0 * s3 - 2.0 * s1 * cos_b],
            [2.0 * s1 - 2.0 * s2 * cos_c, 2.0 * s2 - 2.0 * s1 * cos_c, 0.0],
        ])
        try:
            step = np.linalg.solve(jac, residual)
        except np.linalg.LinAlgError:
            break
        depths = depths - step
    return depths


def _absolute_orientation(world: np.ndarray, camera: np.ndarray) -> Pose:
    """Rigid camera-from-world transform aligning world points onto camera-frame
    points (orthogonal Procrustes)."""
    world_centroid = world.mean(axis=0)
    camera_centroid = camera.mean(axis=0)
    covariance = (world - world_centroid).T @ (camera - camera_centroid)
    u, _, vt = np.linalg.svd(covariance)
    det = np.linalg.det(vt.T @ u.T)
    rot = vt.T @ np.diag([1.0, 1.0, det]) @ u.T
    translation = camera_centroid - rot @ world_centroid
    center = -rot.T @ translation
    return Pose(center, quaternion_from_matrix(rot))


def p3p_solve(c1: Correspondence, c2: Correspondence, c3: Correspondence,
              intr: Intrinsics) -> list[Pose]:
    """All real solutions of the calibrated three-point pose problem.

    Solves the classical quartic in the depth ratio along the third ray,
    recovers the three depths, polishes them with Newton steps, and aligns the
    world triangle onto the camera-frame triangle. Up to four poses are
    returned; collinear points or coincident rays raise
    DegenerateMinimalSetError.
    """
    points = np.stack([c1.point, c2.point, c3.point])
    cross = np.cross(points[1] - points[0], points[2] - points[0])
    edge_scale = np.linalg.norm(points[1] - points[0]) * np.linalg.norm(points[2] - points[0])
    if edge_scale < 1e-18 or np.linalg.norm(cross) < 1e-9 * edge_scale:
        raise DegenerateMinimalSetError("degenerate minimal set: collinear 3D points")

    rays = np.stack([_bearing(intr, c.pixel) for c in (c1, c2, c3)])
    cos_a = float(rays[1] @ rays[2])
    cos_b = float(rays[0] @ rays[2])
    cos_c = float(rays[0] @ rays[1])
    if min(1.0 - abs(cos_a), 1.0 - abs(cos_b), 1.0 - abs(cos_c)) < 1e-12:
        raise DegenerateMinimalSetError("degenerate minimal set: coincident rays")

    side_a_sq = float(np.sum((points[1] - points[2]) ** 2))
    side_b_sq = float(np.sum((points[0] - points[2]) ** 2))
    side_c_sq = float(np.sum((points[0] - points[1]) ** 2))

    # With u = s2/s1, v = s3/s1, eliminating s1 from the distance constraints
    # gives u = N(v) / D(v) and a quartic in v (ascending coefficients below).
    ratio_ac = (side_c_sq - side_a_sq) / side_b_sq
    ratio_c = side_c_sq / side_b_sq
    poly_n = np.array([1.0 - ratio_ac, 2.0 * cos_b * ratio_ac, -1.0 - ratio_ac])
    poly_d = np.array([2.0 * cos_c, -2.0 * cos_a])
    poly_q = np.array([1.0 - ratio_c, 2.0 * cos_b * ratio_c, -ratio_c])
    quartic = (npoly.polymul(poly_n, poly_n)
               - 2.0 * cos_c * npoly.polymul(poly_n, poly_d)
               + npoly.polymul(npoly.polymul(poly_d, poly_d), poly_q))

    candidates: list[Pose] = []
    sides_sq = np.array([side_a_sq, side_b_sq, side_c_sq])
    cosines = np.array([cos_a, cos_b, cos_c])
    for root in npoly.polyroots(quartic):
        if abs(root.imag) > 1e-8 * (1.0 + abs(root.real)):
            continue
        v = float(root.real)
        if v <= 0.0:
            continue
        denom = float(npoly.polyval(v, poly_d))
        numer = float(npoly.polyval(v, poly_n))
        if abs(denom) < 1e-12:
            # fall back to the quadratic in u from the third constraint
            disc = cos_c * cos_c - 1.0 + ratio_c * (1.0 + v * v - 2.0 * v * cos_b)
            if disc < 0.0:
                continue
            u_options = [cos_c + math.sqrt(disc), cos_c - math.sqrt(disc)]
        else:
            u_options = [numer / denom]
        for u in u_options:
            if u <= 0.0:
                continue
            base = 1.0 + v * v - 2.0 * v * cos_b
            if base <= 0.0:
                continue
            s1 = math.sqrt(side_b_sq / base)
            depths = _polish_depths(np.array([s1, u * s1, v * s1]), cosines, sides_sq)
            if np.any(depths <= 0.0):
                continue
            camera_points = depths[:, None] * rays
            pose = _absolute_orientation(points, camera_points)
            errors = [np.linalg.norm(project(pose, intr, points[i])[0]
                                     - (c1, c2, c3)[i].pixel) for i in range(3)]
            if max(errors) > 1e-4:
                continue
            if not any(np.linalg.norm(pose.position - prev.position) < 1e-8
                       and abs(np.dot(pose.orientation, prev.orientation)) > 1.0 - 1e-12
                       for prev in candidates):
                candidates.append(pose)
    return candidates


def reprojection_residuals(pose: Pose, matches: Sequence[Correspondence],
                           intr: Intrinsics) -> np.ndarray:
    """Stacked (2m,) pixel residuals; entries are inf for points at or behind
    the camera."""
    points = np.stack([m.point for m in matches])
    observed = np.stack([m.pixel for m in matches])
    pixels, depths = project_points(pose, intr, points)
    residuals = pixels - observed
    residuals[depths <= MIN_DEPTH] = np.inf
    return residuals.ravel()


def apply_local_update(pose: Pose, step: np.ndarray) -> Pose:
    """Apply a 6-vector update: translation delta plus an axis-angle rotation
    composed onto the quaternion."""
    quat = quaternion_multiply(pose.orientation, quaternion_from_axis_angle(step[3:]))
    return Pose(pose.position + step[:3], quat)


def reprojection_jacobian(pose: Pose, matches: Sequence[Correspondence],
                          intr: Intrinsics) -> np.ndarray:
    """Analytic (2m, 6) Jacobian of the residuals with respect to the local
    update parameters of `apply_local_update`, evaluated at zero."""
    rot = rotation_matrix(pose.orientation)
    jac = np.zeros((2 * len(matches), 6))
    for i, match in enumerate(matches):
        offset = match.point - pose.position
        cam = rot @ offset
        x, y, z = cam
        if z <= MIN_DEPTH:
            jac[2 * i:2 * i + 2] = np.nan
            continue
        d_pix = np.array([[intr.fx / z, 0.0, -intr.fx * x / (z * z)],
                          [0.0, intr.fy / z, -intr.fy * y / (z * z)]])
        skew = np.array([[0.0, -offset[2], offset[1]],
                         [offset[2], 0.0, -offset[0]],
                         [-offset[1], offset[0], 0.0]])
        d_cam = np.hstack([-rot, -rot @ skew])
        jac[2 * i:2 * i + 2] = d_pix @ d_cam
    return jac


def refine_pose(init: Pose, matches: Sequence[Correspondence], intr: Intrinsics,
                max_iter: int = 100, tol: float = 1e-12) -> Pose:
    """Levenberg-Marquardt minimization of the total squared reprojection error
    over a 6-parameter local pose update.

    Steps are accepted only when the cost decreases, so the final cost never
    exceeds the initial one; iteration stops when the gradient norm drops
    below `tol` or after `max_iter` rounds.
    """
    if len(matches) < 4:
        raise ValueError("need at least 4 correspondences")
    pose = init
    residuals = reprojection_residuals(pose, matches, intr)
    cost = float(residuals @ residuals)
    if not math.isfinite(cost):
        raise ValueError("non-finite cost at the initial pose")

    damping = 1e-6
    for _ in range(max_iter):
        jac = reprojection_jacobian(pose, matches, intr)
        gradient = jac.T @ residuals
        if np.linalg.norm(gradient) < tol:
            break
        hessian = jac.T @ jac
        stepped = False
        for _ in range(25):
            try:
                step = np.linalg.solve(hessian + damping * np.eye(6), -gradient)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            trial = apply_local_update(pose, step)
            trial_residuals = reprojection_residuals(trial, matches, intr)
            trial_cost = float(trial_residuals @ trial_residuals)
            if math.isfinite(trial_cost) and trial_cost < cost:
                pose, residuals, cost = trial, trial_residuals, trial_cost
                damping = max(damping / 10.0, 1e-12)
                stepped = True
                break
            damping *= 10.0
        if not stepped:
            break
    return pose


def ransac_pnp(matches: Sequence[Correspondence], intr: Intrinsics,
               cfg: RansacConfig) -> tuple[Pose, list[int], int]:
    """Robust pose from minimal three-point samples, scored by inlier count.

    Candidates from each sample are ranked by inlier count and then by total
    inlier error; the iteration budget adapts to the best inlier ratio via the
    standard confidence bound, capped at cfg.max_iterations. Fewer than four
    inliers raises LocalizationFailedError.
    """
    if len(matches) < 3:
        raise ValueError("need at least 3 correspondences")
    rng = np.random.default_rng(cfg.seed)
    points = np.stack([m.point for m in matches])
    observed = np.stack([m.pixel for m in matches])
    count = len(matches)

    best_pose: Pose | None = None
    best_inliers: np.ndarray | None = None
    best_score = (-1, float("inf"))
    required = cfg.max_iterations
    iterations = 0
    while iterations < min(required, cfg.max_iterations):
        iterations += 1
        sample = rng.choice(count, size=3, replace=False)
        try:
            candidates = p3p_solve(matches[sample[0]], matches[sample[1]],
                                   matches[sample[2]], intr)
        except DegenerateMinimalSetError:
            continue
        for pose in candidates:
            pixels, depths = project_points(pose, intr, points)
            errors = np.linalg.norm(pixels - observed, axis=1)
            inlier_mask = (errors < cfg.inlier_threshold) & (depths > MIN_DEPTH)
            n_inliers = int(inlier_mask.sum())
            if n_inliers == 0:
                continue
            score = (n_inliers, float(errors[inlier_mask].sum()))
            if score[0] > best_score[0] or (score[0] == best_score[0] and score[1] < best_score[1]):
                best_score = score
                best_pose = pose
                best_inliers = inlier_mask
                ratio = n_inliers / count
                if ratio >= 1.0:
                    required = iterations
                else:
                    failure = 1.0 - ratio ** 3
                    required = math.ceil(math.log(1.0 - cfg.confidence) / math.log(failure))
    if best_pose is None or best_score[0] < MIN_INLIERS:
        raise LocalizationFailedError("localization failed: not enough inliers")
    return best_pose, [int(i) for i in np.nonzero(best_inliers)[0]], iterations


def write_correspondence_file(path, image_id: str, matches: Sequence[Correspondence],
                              intr: Intrinsics) -> None:
    """Header `image_id count fx fy cx cy`, then rows `u v X Y Z`."""
    lines = [f"{image_id} {len(matches)} " +
             " ".join(f"{v:.17g}" for v in (intr.fx, intr.fy, intr.cx, intr.cy))]
    for match in matches:
        values = np.concatenate([match.pixel, match.point])
        lines.append(" ".join(f"{v:.17g}" for v in values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_correspondence_file(path) -> tuple[str, list[Correspondence], Intrinsics]:
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    head = lines[0].split()
    image_id, count = head[0], int(head[1])
    intr = Intrinsics(*(float(v) for v in head[2:6]))
    matches = []
    for line in lines[1:]:
        values = [float(v) for v in line.split()]
        matches.append(Correspondence(np.array(values[:2]), np.array(values[2:5])))
    if len(matches) != count:
        raise ValueError(f"correspondence file should hold {count} rows, found {len(matches)}")
    return image_id, matches, intr
