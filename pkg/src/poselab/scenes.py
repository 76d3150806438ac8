"""Procedural scenes, camera trajectories, synthetic appearance, and
correspondence synthesis.

A scene is a cloud of 3D landmarks, each with an appearance scalar in [0, 1)
that modulates how it renders. Trajectory generators reproduce the benchmark
capture patterns (a single line, parallel lines, a planar loop, grid
densification around existing poses). The appearance model turns a pose into
either a small grayscale image (landmark splats) or directly into a smooth,
nonnegative activation vector standing in for a learned embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Correspondence, Intrinsics, project_points
from .poses import Pose, quaternion_from_matrix
from .validation import as_finite_vector

UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class Scene:
    """Landmark cloud with per-landmark appearance scalars and a bounding box."""

    landmarks: np.ndarray          # (L, 3) meters
    appearance: np.ndarray         # (L,) scalars in [0, 1)
    extent: np.ndarray             # (2, 3) min/max corners
    seed: int = 0

    def __post_init__(self):
        landmarks = np.asarray(self.landmarks, dtype=float)
        appearance = np.asarray(self.appearance, dtype=float)
        if landmarks.ndim != 2 or landmarks.shape[1] != 3 or landmarks.shape[0] < 1:
            raise ValueError("landmarks must be a nonempty (L, 3) array")
        if appearance.shape != (landmarks.shape[0],):
            raise ValueError("need one appearance scalar per landmark")
        if not (np.all(np.isfinite(landmarks)) and np.all(np.isfinite(appearance))):
            raise ValueError("scene data must be finite")
        object.__setattr__(self, "landmarks", landmarks)
        object.__setattr__(self, "appearance", appearance)
        object.__setattr__(self, "extent", np.asarray(self.extent, dtype=float))

    @property
    def size(self) -> int:
        return self.landmarks.shape[0]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered (image_id, Pose) pairs tagged as training or test data."""

    poses: tuple
    tag: str = "training"

    def __post_init__(self):
        poses = tuple(self.poses)
        ids = [image_id for image_id, _ in poses]
        if len(set(ids)) != len(ids):
            raise ValueError("image ids must be unique")
        if self.tag not in ("training", "test"):
            raise ValueError("tag must be 'training' or 'test'")
        object.__setattr__(self, "poses", poses)

    def __len__(self):
        return len(self.poses)

    def ids(self) -> list[str]:
        return [image_id for image_id, _ in self.poses]

    def positions(self) -> np.ndarray:
        return np.stack([pose.position for _, pose in self.poses])

    def pose_list(self) -> list[Pose]:
        return [pose for _, pose in self.poses]


@dataclass(frozen=True)
class AppearanceModel:
    """Synthetic image/embedding renderer parameters.

    `splat_radius` is the base Gaussian sigma of a landmark blob in pixels and
    `intensity_falloff` the window cutoff in sigmas. The embedding is a seeded
    random projection of soft landmark visibility weights, clamped at zero so
    downstream heads see nonnegative activations.
    """

    height: int = 64
    width: int = 64
    splat_radius: float = 2.0
    intensity_falloff: float = 3.0
    embedding_dim: int = 32
    embedding_seed: int = 0
    focal: float | None = None

    def __post_init__(self):
        if self.height < 32 or self.width < 32:
            raise ValueError("image size must be at least 32x32")
        if self.embedding_dim < 4:
            raise ValueError("embedding dimension must be at least 4")
        if self.splat_radius <= 0.0 or self.intensity_falloff <= 0.0:
            raise ValueError("rendering parameters must be positive")

    def intrinsics(self) -> Intrinsics:
        focal = self.focal if self.focal is not None else float(self.width)
        return Intrinsics(focal, focal, self.width / 2.0, self.height / 2.0)


def sample_scene(landmark_count: int, extent, seed: int) -> Scene:
    """Uniform landmark cloud inside an axis-aligned box given as (2, 3) corners."""
    corners = np.asarray(extent, dtype=float)
    if corners.shape != (2, 3):
        raise ValueError("extent must be a (2, 3) min/max corner array")
    if landmark_count < 1:
        raise ValueError("need at least one landmark")
    rng = np.random.default_rng(seed)
    landmarks = rng.uniform(corners[0], corners[1], size=(landmark_count, 3))
    appearance = rng.uniform(0.0, 1.0, size=landmark_count)
    return Scene(landmarks, appearance, corners, seed)


def look_at_orientation(position, target) -> np.ndarray:
    """Quaternion of the camera-from-world rotation looking from position to
    target (camera x right, y down, z forward; world z is up)."""
    position = as_finite_vector(position, 3, "position")
    target = as_finite_vector(target, 3, "target")
    forward = target - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("look-at target coincides with the camera position")
    forward = forward / norm
    up = UP if abs(float(forward @ UP)) < 0.999 else np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    return quaternion_from_matrix(np.stack([right, down, forward]))


def _orient(position, look_at, orientation) -> np.ndarray:
    if look_at is not None and orientation is not None:
        raise ValueError("provide either look_at or a fixed orientation, not both")
    if look_at is not None:
        return look_at_orientation(position, look_at)
    if orientation is not None:
        return np.asarray(orientation, dtype=float)
    return np.array([1.0, 0.0, 0.0, 0.0])


def _id_prefix(tag: str, prefix: str | None) -> str:
    return prefix if prefix is not None else ("train" if tag == "training" else "test")


def line_trajectory(origin, direction, count: int, spacing: float, look_at=None,
                    orientation=None, tag: str = "training",
                    id_prefix: str | None = None) -> Trajectory:
    """Equally spaced poses along a line."""
    if count < 2:
        raise ValueError("count must be >= 2")
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    origin = as_finite_vector(origin, 3, "origin")
    direction = as_finite_vector(direction, 3, "direction")
    norm = np.linalg.norm(direction)
    if norm < 1e-12:
        raise ValueError("direction must be nonzero")
    unit = direction / norm
    prefix = _id_prefix(tag, id_prefix)
    poses = []
    for i in range(count):
        position = origin + i * spacing * unit
        poses.append((f"{prefix}_{i:04d}", Pose(position, _orient(position, look_at, orientation))))
    return Trajectory(tuple(poses), tag)


def parallel_lines_trajectory(origin, direction, line_count: int, line_spacing: float,
                              count: int, spacing: float, look_at=None, orientation=None,
                              tag: str = "training", id_prefix: str | None = None) -> Trajectory:
    """Several parallel lines offset sideways in the horizontal plane."""
    if line_count < 1:
        raise ValueError("line_count must be >= 1")
    if line_spacing <= 0.0:
        raise ValueError("line_spacing must be positive")
    origin = as_finite_vector(origin, 3, "origin")
    direction = as_finite_vector(direction, 3, "direction")
    unit = direction / np.linalg.norm(direction)
    lateral = np.cross(UP, unit)
    lateral_norm = np.linalg.norm(lateral)
    if lateral_norm < 1e-12:
        raise ValueError("direction must not be vertical")
    lateral = lateral / lateral_norm
    prefix = _id_prefix(tag, id_prefix)
    poses = []
    index = 0
    for line in range(line_count):
        start = origin + line * line_spacing * lateral
        for i in range(count):
            position = start + i * spacing * unit
            poses.append((f"{prefix}_{index:04d}",
                          Pose(position, _orient(position, look_at, orientation))))
            index += 1
    return Trajectory(tuple(poses), tag)


def planar_loop_trajectory(center, radii, count: int, look_at=None, orientation=None,
                           tag: str = "training", id_prefix: str | None = None) -> Trajectory:
    """Elliptical loop in the horizontal plane through the center."""
    if count < 3:
        raise ValueError("count must be >= 3")
    center = as_finite_vector(center, 3, "center")
    radii = as_finite_vector(radii, 2, "radii")
    if np.any(radii <= 0.0):
        raise ValueError("radii must be positive")
    prefix = _id_prefix(tag, id_prefix)
    poses = []
    for i in range(count):
        angle = 2.0 * math.pi * i / count
        position = center + np.array([radii[0] * math.cos(angle),
                                      radii[1] * math.sin(angle), 0.0])
        poses.append((f"{prefix}_{i:04d}", Pose(position, _orient(position, look_at, orientation))))
    return Trajectory(tuple(poses), tag)


def _grid_axes(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """In-plane axes and normal of the best-fit plane of the positions.

    Rank-deficient sets fall back deterministically: a single cluster of
    points uses the horizontal plane, a line uses the plane spanned by the
    line and its horizontal perpendicular. A vertical line has no such plane.
    """
    centered = positions - positions.mean(axis=0)
    _, singular_values, axes = np.linalg.svd(centered, full_matrices=True)
    scale = float(singular_values[0])
    if scale < 1e-12:
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), UP.copy()
    if singular_values[1] < 1e-9 * scale:
        line_dir = axes[0]
        lateral = np.cross(UP, line_dir)
        lateral_norm = np.linalg.norm(lateral)
        if lateral_norm < 1e-9:
            raise ValueError("degenerate plane fit: training positions on a vertical line")
        lateral = lateral / lateral_norm
        return line_dir, lateral, np.cross(line_dir, lateral)
    return axes[0], axes[1], axes[2]


def grid_augment(training: Trajectory, spacing: float, max_distance: float) -> Trajectory:
    """Additional poses on a regular grid in the best-fit plane of the training
    positions.

    The grid is anchored at the centroid with cells at integer multiples of
    `spacing`; a cell is kept when its distance to the nearest training
    position is at most `max_distance` and it does not duplicate an original
    position (closer than spacing / 100). Each kept pose copies the
    orientation of its nearest training pose.
    """
    if len(training) < 1:
        raise ValueError("training trajectory must be nonempty")
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    if max_distance < 0.0:
        raise ValueError("max_distance must be nonnegative")
    positions = training.positions()
    axis_u, axis_v, _ = _grid_axes(positions)
    anchor = positions.mean(axis=0)

    local = (positions - anchor) @ np.stack([axis_u, axis_v]).T
    reach = max_distance + spacing
    lo_u = math.floor((local[:, 0].min() - reach) / spacing)
    hi_u = math.ceil((local[:, 0].max() + reach) / spacing)
    lo_v = math.floor((local[:, 1].min() - reach) / spacing)
    hi_v = math.ceil((local[:, 1].max() + reach) / spacing)

    originals = training.pose_list()
    added = []
    index = 0
    for i in range(lo_u, hi_u + 1):
        for j in range(lo_v, hi_v + 1):
            candidate = anchor + i * spacing * axis_u + j * spacing * axis_v
            distances = np.linalg.norm(positions - candidate, axis=1)
            nearest = int(np.argmin(distances))
            if distances[nearest] > max_distance:
                continue
            if distances.min() <= spacing / 100.0:
                continue
            added.append((f"aug_{index:04d}", Pose(candidate, originals[nearest].orientation)))
            index += 1
    return Trajectory(tuple(added), "training")


def _appearance_amplitude(appearance: np.ndarray) -> np.ndarray:
    return 0.6 + 0.4 * appearance


def _appearance_sigma_scale(appearance: np.ndarray) -> np.ndarray:
    return 0.75 + 0.5 * ((appearance * 7.13) % 1.0)


def render_image(scene: Scene, model: AppearanceModel, pose: Pose,
                 intr: Intrinsics) -> np.ndarray:
    """Grayscale (H, W) rendering: each visible landmark adds a radially
    decaying blob whose amplitude and width are modulated by its appearance
    scalar; occlusion is ignored."""
    image = np.zeros((model.height, model.width))
    pixels, depths = project_points(pose, intr, scene.landmarks)
    amplitudes = _appearance_amplitude(scene.appearance)
    sigmas = model.splat_radius * _appearance_sigma_scale(scene.appearance)
    for idx in range(scene.size):
        if depths[idx] <= 1e-9:
            continue
        u, v = pixels[idx]
        sigma = sigmas[idx]
        window = model.intensity_falloff * sigma
        if u < -window or u >= model.width + window or v < -window or v >= model.height + window:
            continue
        x0 = max(0, int(math.floor(u - window)))
        x1 = min(model.width - 1, int(math.ceil(u + window)))
        y0 = max(0, int(math.floor(v - window)))
        y1 = min(model.height - 1, int(math.ceil(v + window)))
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0, y1 + 1)
        radial_sq = (xs[None, :] - u) ** 2 + (ys[:, None] - v) ** 2
        image[y0:y1 + 1, x0:x1 + 1] += amplitudes[idx] * np.exp(-radial_sq / (2.0 * sigma * sigma))
    return image


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def visibility_weights(scene: Scene, model: AppearanceModel, pose: Pose) -> np.ndarray:
    """Soft per-landmark visibility in [0, 1]: smooth depth ramp, smooth image
    border falloff, and a smooth distance attenuation."""
    intr = model.intrinsics()
    pixels, depths = project_points(pose, intr, scene.landmarks)
    margin_x = 0.25 * model.width
    margin_y = 0.25 * model.height
    depth_factor = _smoothstep(depths / 0.5)
    in_x = _smoothstep((pixels[:, 0] + margin_x) / margin_x) * \
        _smoothstep((model.width + margin_x - pixels[:, 0]) / margin_x)
    in_y = _smoothstep((pixels[:, 1] + margin_y) / margin_y) * \
        _smoothstep((model.height + margin_y - pixels[:, 1]) / margin_y)
    distance = np.linalg.norm(scene.landmarks - pose.position, axis=1)
    attenuation = 1.0 / (1.0 + (distance / 10.0) ** 2)
    return np.where(depths > 0.0, depth_factor * in_x * in_y * attenuation, 0.0)


def render_embedding(scene: Scene, model: AppearanceModel, pose: Pose) -> np.ndarray:
    """Nonnegative activation vector: a seeded random projection of the
    visibility weights, clamped at zero."""
    rng = np.random.default_rng(model.embedding_seed)
    features = rng.normal(size=(scene.size, model.embedding_dim))
    raw = visibility_weights(scene, model, pose) @ features
    return np.maximum(raw, 0.0)


def visible_landmark_mask(scene: Scene, poses: Sequence[Pose], intr: Intrinsics) -> np.ndarray:
    """Boolean mask of landmarks strictly visible (in front, inside the image)
    from at least one of the given poses; image bounds are [0, 2*cx] x [0, 2*cy]."""
    mask = np.zeros(scene.size, dtype=bool)
    for pose in poses:
        pixels, depths = project_points(pose, intr, scene.landmarks)
        inside = ((depths > 1e-9)
                  & (pixels[:, 0] >= 0.0) & (pixels[:, 0] < 2.0 * intr.cx)
                  & (pixels[:, 1] >= 0.0) & (pixels[:, 1] < 2.0 * intr.cy))
        mask |= inside
    return mask


def make_correspondences(scene: Scene, pose: Pose, intr: Intrinsics,
                         pixel_noise_sigma: float = 0.0, outlier_fraction: float = 0.0,
                         seed: int = 0, landmark_mask=None) -> list[Correspondence]:
    """2D-3D matches for the visible landmarks, with optional Gaussian pixel
    noise and a fraction of pixels replaced by uniform random outliers.

    Image bounds are taken as [0, 2*cx] x [0, 2*cy]. The rounded fraction of
    matches is replaced, so a 0.5 fraction of 100 matches yields exactly 50
    outliers. `landmark_mask` restricts the candidate landmarks (e.g. to those
    seen from the training trajectory).
    """
    if not 0.0 <= outlier_fraction <= 1.0:
        raise ValueError("outlier_fraction must lie in [0, 1]")
    if pixel_noise_sigma < 0.0:
        raise ValueError("pixel_noise_sigma must be nonnegative")
    width = 2.0 * intr.cx
    height = 2.0 * intr.cy
    candidates = scene.landmarks
    if landmark_mask is not None:
        candidates = candidates[np.asarray(landmark_mask, dtype=bool)]
    pixels, depths = project_points(pose, intr, candidates)
    visible = ((depths > 1e-9)
               & (pixels[:, 0] >= 0.0) & (pixels[:, 0] < width)
               & (pixels[:, 1] >= 0.0) & (pixels[:, 1] < height))
    points = candidates[visible]
    observed = pixels[visible]

    rng = np.random.default_rng(seed)
    if pixel_noise_sigma > 0.0:
        observed = observed + rng.normal(0.0, pixel_noise_sigma, observed.shape)
    n_outliers = int(round(outlier_fraction * points.shape[0]))
    if n_outliers > 0:
        chosen = rng.choice(points.shape[0], size=n_outliers, replace=False)
        observed[chosen] = rng.uniform([0.0, 0.0], [width, height], size=(n_outliers, 2))
    return [Correspondence(observed[i], points[i]) for i in range(points.shape[0])]


def write_scene_file(path, scene: Scene) -> None:
    """Header `landmark_count seed`, then rows `X Y Z appearance_seed`."""
    lines = [f"{scene.size} {scene.seed}"]
    for i in range(scene.size):
        values = np.concatenate([scene.landmarks[i], [scene.appearance[i]]])
        lines.append(" ".join(f"{v:.17g}" for v in values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scene_file(path) -> Scene:
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    count, seed = (int(v) for v in lines[0].split())
    rows = [np.array([float(v) for v in line.split()]) for line in lines[1:]]
    if len(rows) != count or any(r.size != 4 for r in rows):
        raise ValueError("scene file does not match its header")
    landmarks = np.stack([r[:3] for r in rows])
    appearance = np.array([r[3] for r in rows])
    extent = np.stack([landmarks.min(axis=0), landmarks.max(axis=0)])
    return Scene(landmarks, appearance, extent, seed)
