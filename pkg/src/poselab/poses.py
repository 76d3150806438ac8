"""Camera pose type, quaternion helpers, error metrics, and affine pose interpolation.

Conventions used across the package:
  - positions are 3-vectors in meters,
  - orientations are unit quaternions (w, x, y, z) stored on the canonical
    hemisphere (w >= 0; if w == 0, the first nonzero of x, y, z is positive),
  - rotation_matrix(q) is the camera-from-world rotation, so a world point X
    seen from a camera at position c appears at rotation_matrix(q) @ (X - c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .validation import as_finite_vector


def normalize_quaternion(q: np.ndarray) -> np.ndarray:
    """Scale to unit norm, iterating to a bitwise fixed point.

    The fixed point guarantees that re-normalizing a stored quaternion is a
    no-op, which keeps pose round-trips (e.g. single-neighbor interpolation)
    bit-identical.
    """
    q = np.asarray(q, dtype=float)
    norm = math.sqrt(float(np.dot(q, q)))
    if norm < 1e-12:
        raise ValueError("cannot normalize near-zero quaternion")
    for _ in range(8):
        if norm == 1.0:
            break
        scaled = q / norm
        if np.array_equal(scaled, q):
            break
        q = scaled
        norm = math.sqrt(float(np.dot(q, q)))
    return q


def canonical_quaternion(q: np.ndarray) -> np.ndarray:
    """Flip sign so w >= 0; if w == 0, the first nonzero of x, y, z is >= 0."""
    q = np.asarray(q, dtype=float)
    w = q[0]
    if w < 0.0:
        return -q
    if w == 0.0:
        for component in q[1:]:
            if component != 0.0:
                return q if component > 0.0 else -q
    return q


def quaternion_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a * b for (w, x, y, z) quaternions."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quaternion_from_axis_angle(axis_angle: np.ndarray) -> np.ndarray:
    """Exponential map: a rotation vector (axis * angle, radians) to a quaternion."""
    axis_angle = np.asarray(axis_angle, dtype=float)
    angle = float(np.linalg.norm(axis_angle))
    if angle < 1e-300:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) / angle * axis_angle))


def rotation_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion (active convention)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quaternion_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Unit quaternion of a rotation matrix (Shepperd's branch method)."""
    rot = np.asarray(rot, dtype=float)
    trace = rot[0, 0] + rot[1, 1] + rot[2, 2]
    if trace > 0.0:
        s = math.sqrt(trace + 1.0) * 2.0
        q = np.array(
            [
                0.25 * s,
                (rot[2, 1] - rot[1, 2]) / s,
                (rot[0, 2] - rot[2, 0]) / s,
                (rot[1, 0] - rot[0, 1]) / s,
            ]
        )
    elif rot[0, 0] >= rot[1, 1] and rot[0, 0] >= rot[2, 2]:
        s = math.sqrt(1.0 + rot[0, 0] - rot[1, 1] - rot[2, 2]) * 2.0
        q = np.array(
            [
                (rot[2, 1] - rot[1, 2]) / s,
                0.25 * s,
                (rot[0, 1] + rot[1, 0]) / s,
                (rot[0, 2] + rot[2, 0]) / s,
            ]
        )
    elif rot[1, 1] >= rot[2, 2]:
        s = math.sqrt(1.0 + rot[1, 1] - rot[0, 0] - rot[2, 2]) * 2.0
        q = np.array(
            [
                (rot[0, 2] - rot[2, 0]) / s,
                (rot[0, 1] + rot[1, 0]) / s,
                0.25 * s,
                (rot[1, 2] + rot[2, 1]) / s,
            ]
        )
    else:
        s = math.sqrt(1.0 + rot[2, 2] - rot[0, 0] - rot[1, 1]) * 2.0
        q = np.array(
            [
                (rot[1, 0] - rot[0, 1]) / s,
                (rot[0, 2] + rot[2, 0]) / s,
                (rot[1, 2] + rot[2, 1]) / s,
                0.25 * s,
            ]
        )
    return canonical_quaternion(normalize_quaternion(q))


@dataclass(frozen=True, eq=False)
class Pose:
    """Camera pose: position in meters plus a canonical unit quaternion."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        position = as_finite_vector(self.position, 3, "position")
        orientation = as_finite_vector(self.orientation, 4, "orientation")
        orientation = canonical_quaternion(normalize_quaternion(orientation))
        position.flags.writeable = False
        orientation.flags.writeable = False
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "orientation", orientation)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def as_vector(self) -> np.ndarray:
        """Stacked (tx, ty, tz, qw, qx, qy, qz)."""
        return np.concatenate([self.position, self.orientation])

    def __repr__(self):  # pragma: no cover - debugging aid
        p = ", ".join(f"{v:.4g}" for v in self.position)
        q = ", ".join(f"{v:.4g}" for v in self.orientation)
        return f"Pose(position=({p}), orientation=({q}))"


@dataclass(frozen=True)
class PoseError:
    """Position error in meters and orientation error in degrees."""

    position_err: float
    orientation_err: float

    def __post_init__(self):
        if not (math.isfinite(self.position_err) and math.isfinite(self.orientation_err)):
            raise ValueError("pose errors must be finite")
        if self.position_err < 0.0 or self.orientation_err < 0.0:
            raise ValueError("pose errors must be nonnegative")


@dataclass(frozen=True)
class AffineWeights:
    """Interpolation weights that sum to one; entries may be negative."""

    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1 or weights.size < 1:
            raise ValueError("weights must be a nonempty vector")
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.weights.size


def position_error(p_hat: Pose, p_gt: Pose) -> float:
    """Euclidean distance between predicted and ground-truth positions, meters."""
    return float(np.linalg.norm(p_hat.position - p_gt.position))


def orientation_error(p_hat: Pose, p_gt: Pose) -> float:
    """Angular distance 2*arccos(|<q_hat, q_gt>|) in degrees; sign-insensitive."""
    dot = abs(float(np.dot(p_hat.orientation, p_gt.orientation)))
    dot = min(dot, 1.0)
    return math.degrees(2.0 * math.acos(dot))


def pose_error(p_hat: Pose, p_gt: Pose) -> PoseError:
    return PoseError(position_error(p_hat, p_gt), orientation_error(p_hat, p_gt))


def median_errors(errors: Sequence[PoseError]) -> tuple[float, float]:
    """Component-wise medians; even counts average the two middle values."""
    if len(errors) == 0:
        raise ValueError("no samples")
    positions = np.array([e.position_err for e in errors])
    orientations = np.array([e.orientation_err for e in errors])
    return float(np.median(positions)), float(np.median(orientations))


def interpolate_poses(weights: AffineWeights, poses: Sequence[Pose]) -> Pose:
    """Affine blend of poses: weighted positions plus a sign-aligned quaternion blend.

    Each quaternion is negated if its dot product with the first one is
    negative, then the weighted sum is renormalized.
    """
    if len(weights) != len(poses) or len(poses) < 1:
        raise ValueError("need one weight per pose and at least one pose")
    w = weights.weights
    positions = np.stack([p.position for p in poses])
    quats = np.stack([p.orientation for p in poses])
    signs = np.where(quats @ quats[0] < 0.0, -1.0, 1.0)
    quats = quats * signs[:, None]

    blended_position = w @ positions
    blended_quat = w @ quats
    if np.linalg.norm(blended_quat) < 1e-6:
        raise ValueError("degenerate orientation blend")
    return Pose(blended_position, blended_quat)


def write_pose_file(path, entries: Sequence[tuple[str, Pose]], header: str | None = None) -> None:
    """One line per image: `image_id tx ty tz qw qx qy qz` (17 significant digits)."""
    lines = []
    if header:
        lines.append(f"# {header}")
    for image_id, pose in entries:
        values = " ".join(f"{v:.17g}" for v in pose.as_vector())
        lines.append(f"{image_id} {values}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pose_file(path) -> list[tuple[str, Pose]]:
    """Parse the pose record format; `#`-prefixed comment lines are ignored."""
    entries = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ValueError(f"{path}:{lineno}: expected `id` plus 7 values, got {len(parts)} fields")
            values = [float(v) for v in parts[1:]]
            entries.append((parts[0], Pose(np.array(values[:3]), np.array(values[3:]))))
    return entries
