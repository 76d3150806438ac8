"""Desk-scale camera relocalization lab.

Pose math, a linear pose-regression head with subspace analysis, a dense
descriptor retrieval pipeline, a P3P/RANSAC reference solver with nonlinear
refinement, procedural scenes that reproduce degenerate capture patterns, and
an evaluation harness comparing the methods.
"""

from .poses import (AffineWeights, Pose, PoseError, interpolate_poses, median_errors,
                    orientation_error, pose_error, position_error, read_pose_file,
                    write_pose_file)
from .heads import (BasePose, PoseHead, base_poses, base_translations, fit_head,
                    pose_offset, predict, raw_predict, read_embedding_file,
                    read_head_file, relevant_bases, span_contains, write_embedding_file,
                    write_head_file)
from .subspace import LineFit, PlaneFit, fit_line, fit_plane
from .retrieval import (DescriptorDatabase, PcaProjection, Vocabulary, affine_weights,
                        dense_local_descriptors, interpolated_pose, kmeans_vocabulary,
                        knn, pca_apply, pca_fit, rootsift_normalize, top1_pose,
                        vlad_aggregate)
from .geometry import (Correspondence, Intrinsics, LocalizationFailedError, RansacConfig,
                       p3p_solve, project, ransac_pnp, refine_pose)
from .scenes import (AppearanceModel, Scene, Trajectory, grid_augment, line_trajectory,
                     make_correspondences, parallel_lines_trajectory,
                     planar_loop_trajectory, render_embedding, render_image,
                     sample_scene)
from .localizers import LinearPoseRegressor, PnPLocalizer, RetrievalLocalizer
from .evaluation import EvalReport, evaluate, render_table

__version__ = "0.1.0"

__all__ = [
    "AffineWeights", "AppearanceModel", "BasePose", "Correspondence",
    "DescriptorDatabase", "EvalReport", "Intrinsics", "LineFit",
    "LinearPoseRegressor", "LocalizationFailedError", "PcaProjection", "PlaneFit",
    "PnPLocalizer", "Pose", "PoseError", "PoseHead", "RansacConfig",
    "RetrievalLocalizer", "Scene", "Trajectory", "Vocabulary", "affine_weights",
    "base_poses", "base_translations", "dense_local_descriptors", "evaluate",
    "fit_head", "fit_line", "fit_plane", "grid_augment", "interpolate_poses",
    "interpolated_pose", "kmeans_vocabulary", "knn", "line_trajectory",
    "make_correspondences", "median_errors", "orientation_error", "p3p_solve",
    "parallel_lines_trajectory", "pca_apply", "pca_fit", "planar_loop_trajectory",
    "pose_error", "pose_offset", "position_error", "predict", "project",
    "ransac_pnp", "raw_predict", "read_embedding_file", "read_head_file",
    "read_pose_file", "refine_pose", "relevant_bases", "render_embedding",
    "render_image", "render_table", "rootsift_normalize", "sample_scene",
    "span_contains", "top1_pose", "vlad_aggregate", "write_embedding_file",
    "write_head_file", "write_pose_file",
]
