"""Estimator-style localization methods with a shared fit/predict surface.

All three localizers follow the scikit-learn protocol (constructor parameters
stored verbatim, `fit` returning self, fitted state in trailing-underscore
attributes, `get_params`/`set_params` via BaseEstimator), so they compose with
generic tooling. `predict` returns one Pose per query, or None when a method
declines to answer (only the correspondence-based localizer can decline).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import retrieval
from .geometry import (Intrinsics, LocalizationFailedError, RansacConfig,
                       ransac_pnp, refine_pose)
from .heads import PoseHead, fit_head, predict
from .poses import Pose
from .validation import stack_vectors


def _check_fitted(estimator, attribute: str):
    if not hasattr(estimator, attribute):
        raise NotFittedError(f"{type(estimator).__name__} is not fitted yet")


class LinearPoseRegressor(BaseEstimator):
    """Linear pose head over activation vectors.

    fit(X, y) takes an (m, n) activation matrix and one target Pose per row;
    predict(X) returns one Pose per row.
    """

    def __init__(self, ridge: float = 0.0, conical: bool = False):
        self.ridge = ridge
        self.conical = conical

    def fit(self, X, y):
        head, residuals = fit_head(X, list(y), ridge_lambda=self.ridge, conical=self.conical)
        self.head_: PoseHead = head
        self.training_residuals_: np.ndarray = residuals
        return self

    def predict(self, X) -> list[Pose]:
        _check_fitted(self, "head_")
        activations = stack_vectors(X, self.head_.n_bases, "activations")
        return [predict(self.head_, row) for row in activations]


class RetrievalLocalizer(BaseEstimator):
    """Image-retrieval localization over grayscale image grids.

    fit(X, y) builds the descriptor database from training images and poses:
    dense local descriptors, a seeded k-means vocabulary, residual aggregation,
    and PCA. predict(X) approximates each query pose by the top-ranked
    training pose (k = 1) or an affine blend of the top-k poses.
    """

    def __init__(self, k: int = 1, vocab_size: int = retrieval.DEFAULT_VOCAB_SIZE,
                 pca_dim: int = retrieval.DEFAULT_PCA_DIM,
                 patch: int = retrieval.DEFAULT_PATCH, stride: int = retrieval.DEFAULT_STRIDE,
                 ridge: float = retrieval.DEFAULT_AFFINE_RIDGE, seed: int = 0):
        self.k = k
        self.vocab_size = vocab_size
        self.pca_dim = pca_dim
        self.patch = patch
        self.stride = stride
        self.ridge = ridge
        self.seed = seed

    def _image_descriptor(self, image) -> np.ndarray:
        locals_ = retrieval.dense_local_descriptors(image, self.patch, self.stride)
        descriptor = retrieval.vlad_aggregate(locals_, self.vocabulary_)
        if self.pca_ is not None:
            descriptor = retrieval.pca_apply(self.pca_, descriptor)
        return descriptor

    def fit(self, X, y):
        images = list(X)
        poses = list(y)
        if len(images) != len(poses) or not images:
            raise ValueError("need one pose per training image")
        all_locals = []
        per_image = []
        for image in images:
            descs = retrieval.dense_local_descriptors(image, self.patch, self.stride)
            per_image.append(descs)
            all_locals.extend(descs)
        self.vocabulary_ = retrieval.kmeans_vocabulary(all_locals, self.vocab_size, self.seed)

        raw = [retrieval.vlad_aggregate(descs, self.vocabulary_) for descs in per_image]
        effective_dim = min(self.pca_dim, len(raw), raw[0].size)
        self.pca_ = retrieval.pca_fit(raw, effective_dim) if effective_dim < raw[0].size else None
        descriptors = [retrieval.pca_apply(self.pca_, d) if self.pca_ is not None else d
                       for d in raw]
        ids = [f"train_{i:05d}" for i in range(len(images))]
        self.database_ = retrieval.DescriptorDatabase(list(zip(ids, descriptors, poses)))
        return self

    def predict(self, X) -> list[Pose]:
        _check_fitted(self, "database_")
        results = []
        for image in X:
            descriptor = self._image_descriptor(image)
            if self.k == 1:
                results.append(retrieval.top1_pose(self.database_, descriptor))
            else:
                results.append(retrieval.interpolated_pose(self.database_, descriptor,
                                                           self.k, self.ridge))
        return results


class PnPLocalizer(BaseEstimator):
    """Correspondence-based localization: robust minimal-sample estimation
    followed by nonlinear refinement on the inlier set.

    predict(X) takes one list of 2D-3D correspondences per query image and
    returns a Pose, or None when no consistent pose is found.
    """

    def __init__(self, intrinsics: Intrinsics | None = None, inlier_threshold: float = 4.0,
                 confidence: float = 0.9999, max_iterations: int = 10000, seed: int = 0):
        self.intrinsics = intrinsics
        self.inlier_threshold = inlier_threshold
        self.confidence = confidence
        self.max_iterations = max_iterations
        self.seed = seed

    def fit(self, X=None, y=None):
        if self.intrinsics is None:
            raise ValueError("intrinsics must be provided")
        self.config_ = RansacConfig(self.inlier_threshold, self.confidence,
                                    self.max_iterations, self.seed)
        return self

    def predict(self, X) -> list[Pose | None]:
        _check_fitted(self, "config_")
        results: list[Pose | None] = []
        for matches in X:
            try:
                pose, inliers, _ = ransac_pnp(matches, self.intrinsics, self.config_)
                subset = [matches[i] for i in inliers]
                results.append(refine_pose(pose, subset, self.intrinsics))
            except (LocalizationFailedError, ValueError):
                results.append(None)
        return results
