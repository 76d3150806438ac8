"""Image-retrieval localization pipeline.

Dense patch descriptors are square-root normalized, pooled against a k-means
vocabulary into a residual-aggregate image descriptor, optionally reduced with
PCA, and compared by exact Euclidean nearest-neighbor search. A query pose is
then approximated by the top-ranked training pose, or by an affine blend of
the top-k training poses whose weights best reconstruct the query descriptor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .poses import AffineWeights, Pose, interpolate_poses
from .validation import stack_vectors

CELL_GRID = 4          # spatial cells per patch side
CELL_BINS = 2          # (mean |d/dx|, mean |d/dy|) per cell
LOCAL_DESCRIPTOR_DIM = CELL_GRID * CELL_GRID * CELL_BINS

DEFAULT_PATCH = 16
DEFAULT_STRIDE = 8
DEFAULT_VOCAB_SIZE = 16
DEFAULT_PCA_DIM = 64
DEFAULT_AFFINE_RIDGE = 1e-8

# Retrieval depth presets for affine interpolation, keyed by capture regime.
TOP_K_PRESETS: dict[str, int] = {
    "outdoor-landmarks": 20,
    "indoor-rooms": 25,
    "campus-robot": 15,
    "indoor-corridor": 2,
}


class DegenerateNeighborhoodError(ValueError):
    """Raised when the interpolation weights cannot be determined."""


def rootsift_normalize(hist) -> np.ndarray:
    """L1-normalize a nonnegative histogram, then take element-wise square roots.

    The result has unit L2 norm; an all-zero histogram maps to the zero vector
    (the degenerate-patch flag).
    """
    hist = np.asarray(hist, dtype=float)
    if np.any(hist < 0.0):
        raise ValueError("histogram entries must be nonnegative")
    total = float(hist.sum())
    if total == 0.0:
        return np.zeros_like(hist)
    return np.sqrt(hist / total)


def dense_local_descriptors(image, patch: int = DEFAULT_PATCH,
                            stride: int = DEFAULT_STRIDE) -> list[np.ndarray]:
    """Single-scale dense grid of patch descriptors, row-major order.

    Each patch is split into a 4x4 cell grid; every cell contributes the mean
    absolute horizontal and vertical gradient, and the 32-bin histogram is
    square-root normalized. Constant patches yield zero vectors.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("image must be a 2-D scalar grid")
    height, width = image.shape
    if height < patch or width < patch:
        raise ValueError(f"image {image.shape} smaller than patch {patch}")
    if patch % CELL_GRID != 0:
        raise ValueError(f"patch size must be a multiple of {CELL_GRID}")

    cell = patch // CELL_GRID
    descriptors = []
    for top in range(0, height - patch + 1, stride):
        for left in range(0, width - patch + 1, stride):
            window = image[top:top + patch, left:left + patch]
            grad_y, grad_x = np.gradient(window)
            hist = np.empty(LOCAL_DESCRIPTOR_DIM)
            idx = 0
            for cy in range(CELL_GRID):
                for cx in range(CELL_GRID):
                    sl = (slice(cy * cell, (cy + 1) * cell), slice(cx * cell, (cx + 1) * cell))
                    hist[idx] = np.abs(grad_x[sl]).mean()
                    hist[idx + 1] = np.abs(grad_y[sl]).mean()
                    idx += 2
            descriptors.append(rootsift_normalize(hist))
    return descriptors


@dataclass(frozen=True, eq=False)
class Vocabulary:
    """K cluster centroids matching the local descriptor length."""

    centroids: np.ndarray

    def __post_init__(self):
        centroids = np.array(self.centroids, dtype=float)
        if centroids.ndim != 2 or centroids.shape[0] < 1:
            raise ValueError("centroids must be a nonempty 2-D array")
        if not np.all(np.isfinite(centroids)):
            raise ValueError("centroids must be finite")
        for i in range(centroids.shape[0]):
            for j in range(i + 1, centroids.shape[0]):
                if np.array_equal(centroids[i], centroids[j]):
                    raise ValueError("centroids must be pairwise distinct")
        centroids.flags.writeable = False
        object.__setattr__(self, "centroids", centroids)

    @property
    def size(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _nearest_centroid(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    distances = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
    return distances.argmin(axis=1)


def kmeans_vocabulary(descriptors, k: int = DEFAULT_VOCAB_SIZE, seed: int = 0,
                      max_iter: int = 50) -> Vocabulary:
    """Lloyd's algorithm from k-means++ seeding, deterministic given the seed.

    Clusters that empty out are reseeded to the point farthest from its
    assigned centroid.
    """
    points = stack_vectors(descriptors, None, "descriptors")
    distinct = np.unique(points, axis=0)
    if distinct.shape[0] < k:
        raise ValueError(f"need at least {k} distinct descriptors, got {distinct.shape[0]}")

    rng = np.random.default_rng(seed)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(points.shape[0])]
    closest_sq = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            remaining = [p for p in distinct if not any(np.array_equal(p, c) for c in centroids[:i])]
            centroids[i] = remaining[0]
        else:
            centroids[i] = points[rng.choice(points.shape[0], p=closest_sq / total)]
        closest_sq = np.minimum(closest_sq, np.sum((points - centroids[i]) ** 2, axis=1))

    assignment = _nearest_centroid(points, centroids)
    for _ in range(max_iter):
        for j in range(k):
            members = points[assignment == j]
            if members.shape[0] == 0:
                worst = int(np.argmax(np.linalg.norm(points - centroids[assignment], axis=1)))
                centroids[j] = points[worst]
                assignment = _nearest_centroid(points, centroids)
            else:
                centroids[j] = members.mean(axis=0)
        new_assignment = _nearest_centroid(points, centroids)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    return Vocabulary(centroids)


def vlad_aggregate(descriptors, vocab: Vocabulary) -> np.ndarray:
    """Residual aggregation: per-cluster sums of (descriptor - centroid),
    intra-normalized per cluster, concatenated, then globally L2-normalized.

    Zero-flagged local descriptors are skipped; the result is a unit vector or
    the zero vector.
    """
    active = [np.asarray(d, dtype=float) for d in descriptors]
    active = [d for d in active if np.any(d != 0.0)]
    blocks = np.zeros((vocab.size, vocab.dim))
    if active:
        points = stack_vectors(active, vocab.dim, "descriptors")
        assignment = _nearest_centroid(points, vocab.centroids)
        for j in range(vocab.size):
            members = points[assignment == j]
            if members.shape[0]:
                blocks[j] = members.sum(axis=0) - members.shape[0] * vocab.centroids[j]
    norms = np.linalg.norm(blocks, axis=1)
    scale = np.where(norms < 1e-12, 1.0, norms)
    flat = (blocks / scale[:, None]).ravel()
    total = np.linalg.norm(flat)
    if total < 1e-12:
        return np.zeros_like(flat)
    return flat / total


@dataclass(frozen=True, eq=False)
class PcaProjection:
    mean: np.ndarray
    components: np.ndarray  # (target_dim, D) rows are principal directions

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        components = np.asarray(self.components, dtype=float)
        if components.ndim != 2 or mean.shape != (components.shape[1],):
            raise ValueError("mean length must match component columns")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", components)


def pca_fit(descriptors, target_dim: int) -> PcaProjection:
    """Mean-centering plus the top principal directions of the sample set."""
    data = stack_vectors(descriptors, None, "descriptors")
    count, dim = data.shape
    if not 1 <= target_dim <= min(dim, count):
        raise ValueError(f"target_dim must be in [1, {min(dim, count)}], got {target_dim}")
    mean = data.mean(axis=0)
    _, _, axes = np.linalg.svd(data - mean, full_matrices=False)
    components = axes[:target_dim].copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0.0:
            row *= -1.0
    return PcaProjection(mean, components)


def pca_apply(projection: PcaProjection, descriptor, renormalize: bool = True) -> np.ndarray:
    """Project a descriptor after mean removal; by default the result is
    re-normalized to unit L2 (zero stays zero)."""
    descriptor = np.asarray(descriptor, dtype=float)
    reduced = projection.components @ (descriptor - projection.mean)
    if not renormalize:
        return reduced
    norm = np.linalg.norm(reduced)
    if norm < 1e-12:
        return np.zeros_like(reduced)
    return reduced / norm


@dataclass(eq=False)
class DescriptorDatabase:
    """Image-level descriptors with attached poses; ids are unique and all
    descriptors share one dimension."""

    entries: list[tuple[str, np.ndarray, Pose]]
    pca: PcaProjection | None = None
    _matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.entries:
            raise ValueError("database must hold at least one entry")
        ids = [e[0] for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("image ids must be unique")
        self.entries = [(i, np.asarray(d, dtype=float), p) for i, d, p in self.entries]
        self._matrix = stack_vectors([e[1] for e in self.entries], None, "descriptors")

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    def __len__(self):
        return len(self.entries)


def knn(db: DescriptorDatabase, query, k: int) -> list[tuple[str, float]]:
    """Exact k nearest entries by Euclidean distance, ties broken by image id;
    k is capped at the database size."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query = np.asarray(query, dtype=float)
    if query.shape != (db.dim,):
        raise ValueError(f"query must have dimension {db.dim}")
    distances = np.linalg.norm(db._matrix - query, axis=1)
    order = sorted(range(len(db)), key=lambda i: (distances[i], db.entries[i][0]))
    return [(db.entries[i][0], float(distances[i])) for i in order[:min(k, len(db))]]


def top1_pose(db: DescriptorDatabase, query) -> Pose:
    """Pose of the nearest database entry."""
    best_id = knn(db, query, 1)[0][0]
    for image_id, _, pose in db.entries:
        if image_id == best_id:
            return pose
    raise KeyError(best_id)  # pragma: no cover - ids come from the db itself


def affine_weights(query, neighbors, ridge: float = DEFAULT_AFFINE_RIDGE) -> AffineWeights:
    """Weights minimizing ||query - sum a_i * neighbor_i|| subject to sum a_i = 1.

    Solved through the KKT linear system of the equality-constrained least
    squares problem. If that system is singular or ill-conditioned (duplicate
    or affinely dependent neighbors), a damping term ridge * ||a - 1/k||^2 is
    added and the solve is repeated; failure after damping raises
    DegenerateNeighborhoodError.
    """
    if ridge < 0.0:
        raise ValueError("ridge must be nonnegative")
    query = np.asarray(query, dtype=float)
    matrix = stack_vectors(neighbors, query.size, "neighbors").T   # (D, k)
    k = matrix.shape[1]
    uniform = np.full(k, 1.0 / k)

    def solve(damping: float) -> np.ndarray | None:
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * (matrix.T @ matrix + damping * np.eye(k))
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([2.0 * (matrix.T @ query + damping * uniform), [1.0]])
        if np.linalg.cond(kkt) > 1e12:
            return None
        try:
            solution = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            return None
        weights = solution[:k]
        if not np.all(np.isfinite(weights)) or abs(weights.sum() - 1.0) > 1e-9:
            return None
        return weights

    weights = solve(0.0)
    if weights is None and ridge > 0.0:
        weights = solve(ridge)
    if weights is None:
        raise DegenerateNeighborhoodError("degenerate neighborhood")
    return AffineWeights(weights)


def interpolated_pose(db: DescriptorDatabase, query, k: int,
                      ridge: float = DEFAULT_AFFINE_RIDGE) -> Pose:
    """Affine blend of the top-k retrieved poses; k = 1 reduces to top1_pose."""
    ranked = knn(db, query, k)
    by_id = {image_id: (descriptor, pose) for image_id, descriptor, pose in db.entries}
    neighbors = [by_id[image_id][0] for image_id, _ in ranked]
    poses = [by_id[image_id][1] for image_id, _ in ranked]
    weights = affine_weights(query, neighbors, ridge)
    return interpolate_poses(weights, poses)


def write_database_file(path, db: DescriptorDatabase) -> None:
    """Header `D count`, then per entry the id, D descriptor values, and the
    7 pose values, all with 17 significant digits."""
    lines = [f"{db.dim} {len(db)}"]
    for image_id, descriptor, pose in db.entries:
        values = np.concatenate([descriptor, pose.as_vector()])
        lines.append(image_id + " " + " ".join(f"{v:.17g}" for v in values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_database_file(path) -> DescriptorDatabase:
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    dim, count = (int(v) for v in lines[0].split())
    if len(lines) != 1 + count:
        raise ValueError(f"database file should hold {count} entries, found {len(lines) - 1}")
    entries = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 1 + dim + 7:
            raise ValueError(f"entry has {len(parts) - 1} values, expected {dim + 7}")
        values = np.array([float(v) for v in parts[1:]])
        entries.append((parts[0], values[:dim], Pose(values[dim:dim + 3], values[dim + 3:])))
    return DescriptorDatabase(entries)


def write_vocabulary_file(path, vocab: Vocabulary) -> None:
    """Header `K dim`, then one centroid per row."""
    lines = [f"{vocab.size} {vocab.dim}"]
    for row in vocab.centroids:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vocabulary_file(path) -> Vocabulary:
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    size, dim = (int(v) for v in lines[0].split())
    rows = [np.array([float(v) for v in line.split()]) for line in lines[1:]]
    if len(rows) != size or any(r.size != dim for r in rows):
        raise ValueError("vocabulary file does not match its header")
    return Vocabulary(np.stack(rows))
