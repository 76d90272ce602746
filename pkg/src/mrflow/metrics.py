"""Classification accuracies (AT / PC / CA) and joint-parameter error curves."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .flow import PairLabel
from .geometry import Line3, point_to_line_distance
from .inference import ArticulationEstimate, ArticulationKind
from .scene.objects import TABLE_LABELS, Category, JointKind

AXIS_SAMPLES = 100
DISTANCE_THRESHOLDS = np.round(np.arange(0, 0.1001, 0.0025), 6)  # metres
ANGLE_THRESHOLDS = np.arange(0, 20.5, 0.5)  # degrees


class EmptyResultsError(InvalidInputError):
    pass


@dataclass(frozen=True, eq=False)
class PairResult:
    """One evaluated pair. ``pred`` is None when inference raised; ``failure`` says why.

    A failed pair was predicted connected and counts as a wrong kind.
    """

    gt: PairLabel
    pred: ArticulationEstimate | None
    category: Category
    scene: str = ""
    a: int = 0
    b: int = 0
    failure: str | None = None

    @property
    def gt_class(self) -> str:
        return self.gt.four_class

    @property
    def pred_class(self) -> str:
        return "failed" if self.pred is None else self.pred.kind.value

    @property
    def pred_connected(self) -> bool:
        return self.pred is None or self.pred.kind is not ArticulationKind.UNCONNECTED

    @property
    def kind_correct(self) -> bool:
        return self.gt_class == self.pred_class

    def axis_errors(self) -> tuple[float, float] | None:
        """(distance, angle) for a gt revolute pair; inf when not predicted revolute."""
        if self.gt_class != JointKind.REVOLUTE.value:
            return None
        if self.pred is None or self.pred.kind is not ArticulationKind.REVOLUTE:
            return math.inf, math.inf
        return (axis_distance_error(self.gt.axis, self.pred.axis, self.gt.span),
                axis_angle_error(self.gt.axis.direction, self.pred.axis.direction))

    def direction_error(self) -> float | None:
        if self.gt_class != JointKind.PRISMATIC.value:
            return None
        if self.pred is None or self.pred.kind is not ArticulationKind.PRISMATIC:
            return math.inf
        return axis_angle_error(self.gt.direction, self.pred.direction)


def axis_angle_error(gt_dir, pred_dir) -> float:
    """Unsigned angle between two directions, in radians."""
    a = np.asarray(gt_dir, dtype=float)
    b = np.asarray(pred_dir, dtype=float)
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), abs(float(a @ b)))


def axis_distance_error(gt_axis: Line3, pred_axis: Line3, span: float, samples: int = AXIS_SAMPLES) -> float:
    """Mean distance from points on the gt axis segment to the predicted line.

    The segment has length ``span`` centred on ``gt_axis.point``; samples sit
    at the centres of ``samples`` equal cells.
    """
    if not span > 0:
        raise InvalidInputError("span must be positive")
    s = ((np.arange(samples) + 0.5) / samples - 0.5) * span
    pts = gt_axis.point + np.multiply.outer(s, gt_axis.direction)
    return float(point_to_line_distance(pts, pred_axis).mean())


def threshold_curve(errors, thresholds) -> np.ndarray:
    """Fraction of ``errors`` at or below each threshold."""
    e = np.sort(np.asarray(errors, dtype=float).ravel())
    t = np.asarray(thresholds, dtype=float).ravel()
    if np.any(np.diff(t) < 0):
        raise InvalidInputError("thresholds must be ascending")
    if e.size == 0:
        raise EmptyResultsError("no errors to summarize")
    return np.searchsorted(e, t, side="right") / e.size


@dataclass(frozen=True)
class AccuracyRow:
    label: str
    n: int
    at: float | None  # None when no pair is a true-positive connection
    pc: float
    ca: float

    def to_dict(self) -> dict:
        return {"label": self.label, "n": self.n, "at": self.at, "pc": self.pc, "ca": self.ca}


@dataclass(frozen=True)
class AccuracyReport:
    rows: list[AccuracyRow]  # table column order, average last

    @property
    def average(self) -> AccuracyRow:
        return self.rows[-1]

    def row(self, label: str) -> AccuracyRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def table(self) -> str:
        def cell(v):
            return "n/a" if v is None else f"{v:.1f}"

        labels = [r.label for r in self.rows]
        width = max(7, *(len(x) + 1 for x in labels))
        lines = ["".ljust(4) + "".join(x.rjust(width) for x in labels)]
        for metric in ("at", "pc", "ca"):
            lines.append(metric.upper().ljust(4) + "".join(cell(getattr(r, metric)).rjust(width) for r in self.rows))
        lines.append("N".ljust(4) + "".join(str(r.n).rjust(width) for r in self.rows))
        return "\n".join(lines) + "\n"


def _row(label: str, results: list[PairResult]) -> AccuracyRow:
    n = len(results)
    if n == 0:
        return AccuracyRow(label, 0, None, math.nan, math.nan)
    ca = sum(r.kind_correct for r in results)
    pc = sum(r.pred_connected == r.gt.connected for r in results)
    tp = [r for r in results if r.gt.connected and r.pred_connected]
    at = 100.0 * sum(r.kind_correct for r in tp) / len(tp) if tp else None
    return AccuracyRow(label, n, at, 100.0 * pc / n, 100.0 * ca / n)


def classification_report(results: list[PairResult]) -> AccuracyReport:
    """Per-category rows in table order, then the average over all pairs."""
    if not results:
        raise EmptyResultsError("no pair results")
    rows = []
    for cat, label in TABLE_LABELS.items():
        sub = [r for r in results if Category(r.category) is cat]
        if sub:
            rows.append(_row(label, sub))
    rows.append(_row("Avg.", list(results)))
    return AccuracyReport(rows)


def _summary(errors: list[float]) -> dict:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        return {"n": 0, "median": None, "max": None}
    fin = e[np.isfinite(e)]
    return {
        "n": int(e.size),
        "misclassified": int(e.size - fin.size),
        "median": float(np.median(e)) if fin.size * 2 > e.size else None,
        "max": float(fin.max()) if fin.size == e.size else None,
    }


@dataclass(eq=False)
class EvaluationReport:
    accuracy: AccuracyReport
    results: list[PairResult]

    def revolute_errors(self) -> tuple[list[float], list[float]]:
        errs = [r.axis_errors() for r in self.results]
        errs = [e for e in errs if e is not None]
        return [d for d, _ in errs], [a for _, a in errs]

    def prismatic_errors(self) -> list[float]:
        return [e for e in (r.direction_error() for r in self.results) if e is not None]

    def curves(self) -> list[tuple[str, float, float]]:
        dist, ang = self.revolute_errors()
        pris = self.prismatic_errors()
        out = []
        specs = [
            ("revolute_axis_distance_m", dist, DISTANCE_THRESHOLDS, 1.0),
            ("revolute_axis_angle_deg", ang, ANGLE_THRESHOLDS, math.degrees(1.0)),
            ("prismatic_direction_angle_deg", pris, ANGLE_THRESHOLDS, math.degrees(1.0)),
        ]
        for name, errs, thresholds, unit in specs:
            if not errs:
                continue
            frac = threshold_curve(np.asarray(errs) * unit, thresholds)
            out.extend((name, float(t), float(f)) for t, f in zip(thresholds, frac))
        return out

    def to_dict(self) -> dict:
        dist, ang = self.revolute_errors()
        pairs = []
        for r in self.results:
            rec = {"scene": r.scene, "a": r.a, "b": r.b, "category": Category(r.category).value,
                   "gt": r.gt_class, "pred": r.pred_class}
            ax = r.axis_errors()
            if ax is not None:
                rec["axis_distance"] = _finite(ax[0])
                rec["axis_angle"] = _finite(ax[1])
            de = r.direction_error()
            if de is not None:
                rec["direction_angle"] = _finite(de)
            if r.failure is not None:
                rec["failure"] = r.failure
            elif r.pred.low_confidence:
                rec["low_confidence"] = True
            pairs.append(rec)
        return {
            "accuracy": self.accuracy.to_dict(),
            "revolute": {"axis_distance": _summary(dist), "axis_angle": _summary(ang)},
            "prismatic": {"direction_angle": _summary(self.prismatic_errors())},
            "pairs": pairs,
        }


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


def evaluate_results(results: list[PairResult]) -> EvaluationReport:
    return EvaluationReport(classification_report(results), list(results))


def curves_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "threshold", "fraction"])
    for name, t, f in report.curves():
        w.writerow([name, repr(t), repr(f)])
    return buf.getvalue()


def write_report(report: EvaluationReport, out_dir, extra: dict | None = None) -> None:
    """report.json, table.txt and curves.csv under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    (out / "table.txt").write_text(report.accuracy.table())
    (out / "curves.csv").write_text(curves_csv(report))
