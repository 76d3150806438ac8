"""Evaluation reports: per-image records, median errors, localization rate,
and the aligned text tables used to compare methods across scenarios."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .poses import Pose, PoseError, median_errors, pose_error
from .scenes import Trajectory


@dataclass(frozen=True, eq=False)
class ImageRecord:
    image_id: str
    predicted: Pose | None
    error: PoseError | None


@dataclass(eq=False)
class EvalReport:
    """Evaluation of one method on one scenario.

    Medians are computed only over localized images; `localization_rate` is
    the localized fraction. A report with zero localized images carries None
    medians.
    """

    method: str
    scenario: str
    records: list[ImageRecord]
    median_position_err: float | None = field(init=False)
    median_orientation_err: float | None = field(init=False)
    localization_rate: float = field(init=False)

    def __post_init__(self):
        if not self.records:
            raise ValueError("report needs at least one record")
        errors = [r.error for r in self.records if r.error is not None]
        if errors:
            pos, rot = median_errors(errors)
            self.median_position_err = pos
            self.median_orientation_err = rot
        else:
            self.median_position_err = None
            self.median_orientation_err = None
        self.localization_rate = len(errors) / len(self.records)


def evaluate(method: str, scenario: str, predictions: Sequence[Pose | None],
             test: Trajectory) -> EvalReport:
    """Score one prediction per test image against the ground-truth trajectory."""
    if len(predictions) != len(test):
        raise ValueError("need one prediction (or None) per test image")
    records = []
    for (image_id, gt), predicted in zip(test.poses, predictions):
        error = pose_error(predicted, gt) if predicted is not None else None
        records.append(ImageRecord(image_id, predicted, error))
    return EvalReport(method, scenario, records)


def report_to_json(report: EvalReport) -> str:
    records = []
    for record in report.records:
        entry: dict = {"image_id": record.image_id}
        if record.predicted is None:
            entry["localized"] = False
        else:
            entry["localized"] = True
            entry["pose"] = [float(v) for v in record.predicted.as_vector()]
            entry["position_err"] = record.error.position_err
            entry["orientation_err"] = record.error.orientation_err
        records.append(entry)
    payload = {
        "method": report.method,
        "scenario": report.scenario,
        "median_position_err": report.median_position_err,
        "median_orientation_err": report.median_orientation_err,
        "localization_rate": report.localization_rate,
        "records": records,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def report_from_json(text: str) -> EvalReport:
    payload = json.loads(text)
    records = []
    for entry in payload["records"]:
        if entry["localized"]:
            values = np.array(entry["pose"])
            predicted = Pose(values[:3], values[3:])
            error = PoseError(entry["position_err"], entry["orientation_err"])
        else:
            predicted, error = None, None
        records.append(ImageRecord(entry["image_id"], predicted, error))
    return EvalReport(payload["method"], payload["scenario"], records)


def _cell(report: EvalReport) -> str:
    if report.median_position_err is None:
        return "failed"
    return f"{report.median_position_err:.2f} / {report.median_orientation_err:.2f}"


def render_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: one row per method, one column per scenario, cells
    formatted as `position / orientation` with two decimals."""
    if not reports:
        raise ValueError("need at least one report")
    methods = []
    scenarios = []
    for report in reports:
        if report.method not in methods:
            methods.append(report.method)
        if report.scenario not in scenarios:
            scenarios.append(report.scenario)
    cells = {(r.method, r.scenario): _cell(r) for r in reports}

    header = ["method"] + scenarios
    rows = [[method] + [cells.get((method, s), "") for s in scenarios] for method in methods]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(value.ljust(widths[i]) for i, value in enumerate(header)).rstrip()]
    lines.append("  ".join("-" * widths[i] for i in range(len(header))))
    for row in rows:
        lines.append("  ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"
