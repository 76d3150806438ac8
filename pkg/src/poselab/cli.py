"""Command-line harness: scene generation, head fitting, method evaluation,
base-translation analysis, trajectory plots, and comparison tables.

Every command is deterministic given its flags; stochastic commands require an
explicit --seed. Flags can be preloaded from a JSON config file via --config
(flag names with dashes map to underscored keys).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import heads
from .evaluation import evaluate, render_table, report_from_json, report_to_json
from .localizers import LinearPoseRegressor, PnPLocalizer, RetrievalLocalizer
from .poses import Pose, read_pose_file, write_pose_file
from .scenes import (AppearanceModel, Scene, Trajectory, grid_augment, line_trajectory,
                     make_correspondences, planar_loop_trajectory, read_scene_file,
                     render_embedding, render_image, sample_scene, visible_landmark_mask,
                     parallel_lines_trajectory, write_scene_file)
from .subspace import fit_line, fit_plane
from .svgplot import (PREDICTION_COLORS, TEST_COLOR, TRAINING_COLOR,
                      base_translation_svg, trajectory_svg)

WEIGHT_STATS = ("mean-abs", "signed-mean", "weighted-norm")


def _trajectory_from_file(path, tag: str) -> Trajectory:
    return Trajectory(tuple(read_pose_file(path)), tag)


def _write_trajectory(path, trajectory: Trajectory) -> None:
    write_pose_file(path, list(trajectory.poses))


def _model_from_args(args) -> AppearanceModel:
    return AppearanceModel(height=args.image_size, width=args.image_size,
                           embedding_dim=args.embed_dim, embedding_seed=args.embed_seed)


def _add_model_args(parser) -> None:
    parser.add_argument("--image-size", type=int, default=64, help="square image side in pixels")
    parser.add_argument("--embed-dim", type=int, default=32, help="embedding dimension")
    parser.add_argument("--embed-seed", type=int, default=7, help="embedding projection seed")


# ---------------------------------------------------------------- scenegen

_SCENE_EXTENT = np.array([[-6.0, 8.0, -1.0], [6.0, 14.0, 3.0]])
_SCENE_CENTER = np.array([0.0, 11.0, 1.0])


def cmd_scenegen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = sample_scene(args.landmarks, _SCENE_EXTENT, args.seed)

    if args.preset == "line":
        train = line_trajectory([-3.0, 0.0, 1.0], [1.0, 0.0, 0.0], args.count,
                                args.spacing, look_at=_SCENE_CENTER, tag="training")
        test = line_trajectory([-3.0, args.offset, 1.0], [1.0, 0.0, 0.0], args.count,
                               args.spacing, look_at=_SCENE_CENTER, tag="test")
    elif args.preset == "parallel":
        train = parallel_lines_trajectory([-3.0, -1.0, 1.0], [1.0, 0.0, 0.0], 3, 1.0,
                                          args.count, args.spacing,
                                          look_at=_SCENE_CENTER, tag="training")
        test = line_trajectory([-3.0, 0.5, 1.0], [1.0, 0.0, 0.0], args.count,
                               args.spacing, look_at=_SCENE_CENTER, tag="test")
    elif args.preset == "loop":
        train = planar_loop_trajectory([0.0, 2.0, 1.0], [3.0, 2.0], args.count,
                                       look_at=_SCENE_CENTER, tag="training")
        test = planar_loop_trajectory([0.0, 2.0, 1.0], [2.0, 1.2], max(3, args.count // 2),
                                      look_at=_SCENE_CENTER, tag="test")
    elif args.preset == "grid":
        base = planar_loop_trajectory([0.0, 2.0, 1.0], [3.0, 2.0], args.count,
                                      look_at=_SCENE_CENTER, tag="training")
        extra = grid_augment(base, args.spacing, args.max_distance)
        merged = tuple(base.poses) + tuple(extra.poses)
        train = Trajectory(merged, "training")
        test = planar_loop_trajectory([0.0, 2.0, 1.0], [2.0, 1.2], max(3, args.count // 2),
                                      look_at=_SCENE_CENTER, tag="test")
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown preset {args.preset}")

    write_scene_file(out / "scene.txt", scene)
    _write_trajectory(out / "train.txt", train)
    _write_trajectory(out / "test.txt", test)
    print(f"wrote scene ({scene.size} landmarks), {len(train)} training and "
          f"{len(test)} test poses to {out}")
    return 0


# ---------------------------------------------------------------- fit-apr

def cmd_fit_apr(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = read_scene_file(args.scene)
    train = _trajectory_from_file(args.train, "training")
    model = _model_from_args(args)

    embeddings = [render_embedding(scene, model, pose) for pose in train.pose_list()]
    regressor = LinearPoseRegressor(ridge=args.ridge, conical=True)
    regressor.fit(embeddings, train.pose_list())

    heads.write_head_file(out / "head.txt", regressor.head_)
    heads.write_embedding_file(out / "embeddings.txt", list(zip(train.ids(), embeddings)))

    train_report = evaluate("apr", "training", regressor.predict(embeddings), train)
    summary = {
        "samples": len(train),
        "embedding_dim": model.embedding_dim,
        "ridge": args.ridge,
        "median_residual": float(np.median(regressor.training_residuals_)),
        "max_residual": float(np.max(regressor.training_residuals_)),
        "training_median_position_err": train_report.median_position_err,
        "training_median_orientation_err": train_report.median_orientation_err,
    }
    (out / "fit_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"fitted head over {len(train)} samples; median residual "
          f"{summary['median_residual']:.3g}")
    return 0


# ---------------------------------------------------------------- eval

def _parse_method(method: str) -> tuple[str, int]:
    if method in ("apr", "retrieval-top1", "pnp"):
        return method, 1
    if method.startswith("retrieval-interp:"):
        k = int(method.split(":", 1)[1])
        if k < 1:
            raise ValueError("interpolation depth must be >= 1")
        return "retrieval-interp", k
    raise ValueError(f"unknown method {method!r}")


def run_eval(args):
    scene = read_scene_file(args.scene)
    train = _trajectory_from_file(args.train, "training")
    test = _trajectory_from_file(args.test, "test")
    model = _model_from_args(args)
    kind, k = _parse_method(args.method)
    scenario = args.scenario or Path(args.test).stem

    if kind == "apr":
        if not args.head:
            raise ValueError("apr evaluation requires --head")
        head = heads.read_head_file(args.head)
        predictions = [heads.predict(head, render_embedding(scene, model, pose))
                       for pose in test.pose_list()]
    elif kind in ("retrieval-top1", "retrieval-interp"):
        intr = model.intrinsics()
        localizer = RetrievalLocalizer(k=k, vocab_size=args.vocab_size, pca_dim=args.pca_dim,
                                       ridge=args.interp_ridge, seed=args.seed)
        train_images = [render_image(scene, model, pose, intr) for pose in train.pose_list()]
        localizer.fit(train_images, train.pose_list())
        test_images = [render_image(scene, model, pose, intr) for pose in test.pose_list()]
        predictions = localizer.predict(test_images)
    else:  # pnp
        intr = model.intrinsics()
        mask = None
        if args.train_visible_only:
            mask = visible_landmark_mask(scene, train.pose_list(), intr)
        queries = [make_correspondences(scene, pose, intr, args.pixel_noise,
                                        args.outlier_fraction, seed=[args.seed, i],
                                        landmark_mask=mask)
                   for i, pose in enumerate(test.pose_list())]
        localizer = PnPLocalizer(intr, inlier_threshold=args.inlier_threshold,
                                 confidence=args.confidence,
                                 max_iterations=args.max_iterations, seed=args.seed).fit()
        predictions = localizer.predict(queries)

    return evaluate(args.method, scenario, predictions, test)


def cmd_eval(args) -> int:
    report = run_eval(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report_to_json(report) + "\n")
    table = render_table([report])
    out.with_suffix(".txt").write_text(table)
    print(table, end="")
    return 0


# ---------------------------------------------------------------- analyze-bases

def cmd_analyze_bases(args) -> int:
    head = heads.read_head_file(args.head)
    entries = heads.read_embedding_file(args.embeddings)
    activations = np.stack([vector for _, vector in entries])
    if activations.shape[1] != head.n_bases:
        raise ValueError("embedding file does not match the head dimension")

    translations = heads.base_translations(head)
    magnitudes = np.abs(activations)
    if args.stat == "mean-abs":
        weights = magnitudes.mean(axis=0)
    elif args.stat == "signed-mean":
        weights = activations.mean(axis=0)
    else:  # weighted-norm
        weights = magnitudes.mean(axis=0) * np.linalg.norm(translations, axis=1)

    line = fit_line(translations, args.inlier_tol)
    plane = fit_plane(translations, args.inlier_tol)
    report = {
        "n_bases": head.n_bases,
        "split_k": head.split_k,
        "conical": head.conical,
        "weight_stat": args.stat,
        "line_fit": {
            "anchor": [float(v) for v in line.anchor],
            "direction": [float(v) for v in line.direction],
            "rms_residual": line.rms_residual,
            "inlier_fraction": line.inlier_fraction,
        },
        "plane_fit": {
            "anchor": [float(v) for v in plane.anchor],
            "normal": [float(v) for v in plane.normal],
            "rms_residual": plane.rms_residual,
            "inlier_fraction": plane.inlier_fraction,
        },
        "per_base": [
            {"index": j, "translation_norm": float(np.linalg.norm(translations[j])),
             "weight": float(weights[j])}
            for j in range(head.n_bases)
        ],
        "per_image": [
            {"image_id": image_id, "max_abs_activation": float(np.max(np.abs(vector))),
             "active_bases": int(np.sum(np.abs(vector) > 0.0))}
            for image_id, vector in entries
        ],
    }
    Path(args.out_report).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out_report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    orientation_only = None
    if head.split_k is not None:
        orientation_only = np.arange(head.n_bases) >= head.split_k
    svg = base_translation_svg(translations, weights, orientation_only)
    Path(args.out_svg).write_text(svg)
    print(f"base translations: line inliers {line.inlier_fraction:.2f}, "
          f"plane inliers {plane.inlier_fraction:.2f}")
    return 0


# ---------------------------------------------------------------- plot

def cmd_plot(args) -> int:
    groups = []
    if args.train:
        train = _trajectory_from_file(args.train, "training")
        groups.append(("training", TRAINING_COLOR, train.positions()))
    if args.test:
        test = _trajectory_from_file(args.test, "test")
        groups.append(("test", TEST_COLOR, test.positions()))
    for slot, spec in enumerate(args.pred or []):
        label, _, path = spec.partition("=")
        if not path:
            raise ValueError("prediction spec must look like label=path")
        poses = read_pose_file(path)
        color = PREDICTION_COLORS[slot % len(PREDICTION_COLORS)]
        groups.append((label, color, np.stack([p.position for _, p in poses])))
    if not groups:
        raise ValueError("nothing to plot")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(trajectory_svg(groups))
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------- table

def cmd_table(args) -> int:
    reports = [report_from_json(Path(path).read_text()) for path in args.reports]
    table = render_table(reports)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(table)
    print(table, end="")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poselab",
                                     description="Desk-scale camera relocalization lab")
    parser.add_argument("--config", help="JSON file with default values for the flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenegen", help="generate a scene and trajectories")
    p.add_argument("--preset", choices=("line", "parallel", "loop", "grid"), required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--landmarks", type=int, default=200)
    p.add_argument("--count", type=int, default=25, help="poses per trajectory segment")
    p.add_argument("--spacing", type=float, default=0.25, help="pose spacing in meters")
    p.add_argument("--offset", type=float, default=3.0, help="test line offset (line preset)")
    p.add_argument("--max-distance", type=float, default=3.0, help="grid reach in meters")
    p.set_defaults(func=cmd_scenegen)

    p = sub.add_parser("fit-apr", help="fit a linear pose head on a training trajectory")
    p.add_argument("--scene", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--ridge", type=float, default=0.0)
    _add_model_args(p)
    p.set_defaults(func=cmd_fit_apr)

    p = sub.add_parser("eval", help="evaluate a method on a test trajectory")
    p.add_argument("--scene", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--method", required=True,
                   help="apr | retrieval-top1 | retrieval-interp:k | pnp")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scenario", default=None, help="scenario label (default: test file stem)")
    p.add_argument("--head", default=None, help="head file (apr)")
    p.add_argument("--vocab-size", type=int, default=16)
    p.add_argument("--pca-dim", type=int, default=64)
    p.add_argument("--interp-ridge", type=float, default=1e-8)
    p.add_argument("--pixel-noise", type=float, default=0.0)
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--train-visible-only", action="store_true")
    p.add_argument("--inlier-threshold", type=float, default=4.0)
    p.add_argument("--confidence", type=float, default=0.9999)
    p.add_argument("--max-iterations", type=int, default=10000)
    _add_model_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze-bases", help="analyze base translations of a head file")
    p.add_argument("--head", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-svg", required=True)
    p.add_argument("--stat", choices=WEIGHT_STATS, default="mean-abs")
    p.add_argument("--inlier-tol", type=float, default=0.05)
    p.set_defaults(func=cmd_analyze_bases)

    p = sub.add_parser("plot", help="top-down SVG of trajectories and predictions")
    p.add_argument("--train", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--pred", action="append", default=[], metavar="LABEL=POSEFILE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("table", help="aligned text table from report JSON files")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        parser.set_defaults(**overrides)
        args = parser.parse_args(argv)
    else:
        args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
