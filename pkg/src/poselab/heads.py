"""Linear pose head over embedding vectors.

A head maps an n-dimensional activation vector to a stacked
(position, quaternion) output through `bias + projection @ activations`.
Each projection column is a base pose: a translation increment (meters per
unit activation) plus an orientation increment. The analysis helpers below
expose the structure of a trained head: which bases an image set activates,
whether a set of base translations spans given target positions, and the
offset identity relating two raw predictions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .poses import Pose
from .validation import as_finite_matrix, as_finite_vector, stack_vectors

ORIENTATION_DIM = 4
OUTPUT_DIM = 3 + ORIENTATION_DIM


@dataclass(frozen=True, eq=False)
class PoseHead:
    """Linear output layer: `raw = bias + projection @ activations`.

    `conical` marks heads whose activations are guaranteed nonnegative
    (e.g. produced behind a ReLU-style clamp). `split_k` marks block-structured
    heads whose first `split_k` columns carry only translation and whose
    remaining columns carry only orientation; the block-zero pattern is
    verified on construction.
    """

    projection: np.ndarray
    bias: np.ndarray
    conical: bool = False
    split_k: int | None = None

    def __post_init__(self):
        projection = as_finite_matrix(self.projection, "projection")
        if projection.shape[0] != OUTPUT_DIM:
            raise ValueError(f"projection must have {OUTPUT_DIM} rows, got {projection.shape[0]}")
        bias = as_finite_vector(self.bias, OUTPUT_DIM, "bias")
        if self.split_k is not None:
            k = self.split_k
            if not 0 <= k <= projection.shape[1]:
                raise ValueError(f"split_k must be in [0, {projection.shape[1]}], got {k}")
            if np.any(projection[3:, :k] != 0.0) or np.any(projection[:3, k:] != 0.0):
                raise ValueError("split head must have zero orientation rows in the first "
                                 "split_k columns and zero position rows in the rest")
        projection.flags.writeable = False
        bias.flags.writeable = False
        object.__setattr__(self, "projection", projection)
        object.__setattr__(self, "bias", bias)

    @property
    def n_bases(self) -> int:
        return self.projection.shape[1]


@dataclass(frozen=True, eq=False)
class BasePose:
    """One projection column: translation part (meters per unit activation)
    and orientation part (dimensionless per unit activation)."""

    translation: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "translation", as_finite_vector(self.translation, 3, "translation"))
        object.__setattr__(self, "orientation",
                           as_finite_vector(self.orientation, ORIENTATION_DIM, "orientation"))


def _check_activations(head: PoseHead, activations: np.ndarray) -> np.ndarray:
    arr = np.asarray(activations, dtype=float)
    if arr.shape[-1] != head.n_bases:
        raise ValueError(f"activations must have length {head.n_bases}, got {arr.shape[-1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("activations must be finite")
    if head.conical and np.any(arr < 0.0):
        raise ValueError("conical head requires nonnegative activations")
    return arr


def raw_predict(head: PoseHead, activations) -> np.ndarray:
    """Un-normalized 7-vector output `bias + projection @ activations`.

    Accepts a single activation vector (n,) or a batch (m, n); the batch
    form returns (m, 7).
    """
    arr = _check_activations(head, activations)
    return head.bias + arr @ head.projection.T


def predict(head: PoseHead, activations) -> Pose:
    """Predicted pose: raw position plus the renormalized raw quaternion."""
    raw = raw_predict(head, activations)
    if raw.ndim != 1:
        raise ValueError("predict takes a single activation vector; use raw_predict for batches")
    if np.linalg.norm(raw[3:]) < 1e-9:
        raise ValueError("degenerate orientation output")
    return Pose(raw[:3], raw[3:])


def base_poses(head: PoseHead) -> list[BasePose]:
    """Decompose each projection column into translation and orientation parts."""
    return [BasePose(head.projection[:3, j], head.projection[3:, j]) for j in range(head.n_bases)]


def base_translations(head: PoseHead) -> np.ndarray:
    """(n, 3) array of the translation parts of all base poses."""
    return head.projection[:3, :].T.copy()


def relevant_bases(head: PoseHead, activations_list, tau: float = 0.0) -> set[int]:
    """Indices whose activation magnitude exceeds `tau` times the global maximum.

    With tau = 0 this is the strict condition "some image activates the base";
    a positive tau discards bases whose activations never rise above the
    relative threshold.
    """
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    stacked = stack_vectors(activations_list, head.n_bases, "activations")
    magnitudes = np.abs(stacked)
    global_max = float(magnitudes.max())
    per_base = magnitudes.max(axis=0)
    return {int(j) for j in np.nonzero(per_base > tau * global_max)[0]}


def span_contains(head: PoseHead, base_idx, test_positions, tol: float) -> tuple[np.ndarray, bool]:
    """Least-squares distance of bias-relative positions to the span of selected
    base translations.

    Returns per-position residuals (meters) and True iff all residuals <= tol.
    """
    indices = sorted(int(j) for j in base_idx)
    if not indices:
        raise ValueError("base index set must be nonempty")
    if any(j < 0 or j >= head.n_bases for j in indices):
        raise ValueError("base index out of range")
    targets = stack_vectors(test_positions, 3, "test_positions")
    columns = head.projection[:3, indices]
    rhs = (targets - head.bias[:3]).T
    coeffs, *_ = np.linalg.lstsq(columns, rhs, rcond=None)
    residuals = np.linalg.norm(columns @ coeffs - rhs, axis=0)
    return residuals, bool(np.all(residuals <= tol))


def pose_offset(head: PoseHead, activations_i, activations_j) -> np.ndarray:
    """Raw prediction difference `projection @ (alpha_i - alpha_j)` as a 7-vector."""
    a_i = _check_activations(head, activations_i)
    a_j = _check_activations(head, activations_j)
    if a_i.shape != a_j.shape:
        raise ValueError("activation vectors must have matching shapes")
    return head.projection @ (a_i - a_j)


def fit_head(activations_list, targets: Sequence[Pose], ridge_lambda: float = 0.0,
             conical: bool = False) -> tuple[PoseHead, np.ndarray]:
    """Least-squares head fit with optional ridge penalty on the projection.

    Minimizes sum ||bias + projection @ a_i - y_i||^2 + lambda * ||projection||_F^2
    where y_i stacks position and quaternion (targets sign-aligned to the first
    one). The bias absorbs the sample means; with lambda = 0 the projection is
    the minimum-Frobenius-norm solution of the centered problem, so targets
    confined to an affine subspace yield base translations confined to its
    direction space.

    Returns the head and the per-sample training residual norms.
    """
    if ridge_lambda < 0.0:
        raise ValueError("ridge_lambda must be nonnegative")
    if len(targets) == 0:
        raise ValueError("need at least one training sample")
    acts = stack_vectors(activations_list, None, "activations")
    if acts.shape[0] != len(targets):
        raise ValueError(f"got {acts.shape[0]} activation vectors for {len(targets)} targets")

    reference = targets[0].orientation
    rows = []
    for pose in targets:
        quat = pose.orientation
        if float(np.dot(quat, reference)) < 0.0:
            quat = -quat
        rows.append(np.concatenate([pose.position, quat]))
    outputs = np.stack(rows).T                      # (7, m)
    inputs = acts.T                                 # (n, m)

    input_mean = inputs.mean(axis=1, keepdims=True)
    output_mean = outputs.mean(axis=1, keepdims=True)
    inputs_c = inputs - input_mean
    outputs_c = outputs - output_mean

    if ridge_lambda == 0.0:
        projection = outputs_c @ np.linalg.pinv(inputs_c)
    else:
        gram = inputs_c @ inputs_c.T + ridge_lambda * np.eye(inputs.shape[0])
        projection = np.linalg.solve(gram, (outputs_c @ inputs_c.T).T).T
    bias = (output_mean - projection @ input_mean).ravel()

    head = PoseHead(projection, bias, conical=conical)
    residuals = np.linalg.norm(raw_predict(head, acts) - outputs.T, axis=1)
    return head, residuals


def write_head_file(path, head: PoseHead) -> None:
    """Header `n r split_k conical` (split_k -1 when unset), then the bias line,
    then one projection column per line; decimals carry 17 significant digits."""
    lines = [f"{head.n_bases} {ORIENTATION_DIM} "
             f"{-1 if head.split_k is None else head.split_k} {int(head.conical)}"]
    lines.append(" ".join(f"{v:.17g}" for v in head.bias))
    for j in range(head.n_bases):
        lines.append(" ".join(f"{v:.17g}" for v in head.projection[:, j]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_head_file(path) -> PoseHead:
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    n, r, split_k, conical = (int(v) for v in lines[0].split())
    if r != ORIENTATION_DIM:
        raise ValueError(f"unsupported orientation dimension {r}")
    if len(lines) != 2 + n:
        raise ValueError(f"head file should hold {2 + n} lines, found {len(lines)}")
    bias = np.array([float(v) for v in lines[1].split()])
    columns = [np.array([float(v) for v in line.split()]) for line in lines[2:]]
    projection = np.stack(columns, axis=1) if columns else np.zeros((OUTPUT_DIM, 0))
    return PoseHead(projection, bias, conical=bool(conical),
                    split_k=None if split_k < 0 else split_k)


def write_embedding_file(path, entries: Sequence[tuple[str, np.ndarray]]) -> None:
    """One line per image: `image_id` followed by the activation values."""
    lines = []
    for image_id, vector in entries:
        values = " ".join(f"{v:.17g}" for v in np.asarray(vector, dtype=float))
        lines.append(f"{image_id} {values}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_embedding_file(path) -> list[tuple[str, np.ndarray]]:
    entries = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            entries.append((parts[0], np.array([float(v) for v in parts[1:]])))
    return entries
