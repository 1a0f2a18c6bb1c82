"""Pixel-wise accuracy metrics and timing reports.

Changed/disaster pixels are the positive class. A metric whose denominator
is zero is undefined and is reported as ``None`` (rendered ``n/a``), never
as 0 or NaN.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .changedetect.pipeline import INFERENCE_STAGE, TRAINING_STAGE, DiagnosticsBundle
from .errors import GridMismatchError
from .raster import ChangeMap

UNDEFINED = None
METRIC_NAMES = ("precision", "recall", "oa", "f1", "iou")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred: ChangeMap, gt: ChangeMap) -> ConfusionMatrix:
    """Tally the four outcomes over pixels valid in both maps."""
    if pred.shape != gt.shape:
        raise GridMismatchError(
            f"prediction {pred.width}x{pred.height} and truth {gt.width}x{gt.height} differ",
            stage="confusion")
    valid = pred.valid_mask() & gt.valid_mask()
    p = pred.values.astype(bool)[valid]
    g = gt.values.astype(bool)[valid]
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionMatrix(tp, fp, fn, int(p.size) - tp - fp - fn)


def _pct(num: float, den: float) -> float | None:
    return 100.0 * num / den if den > 0 else UNDEFINED


@dataclass(frozen=True)
class Metrics:
    precision: float | None
    recall: float | None
    oa: float | None
    f1: float | None
    iou: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    def rendered(self) -> dict[str, str]:
        return {k: render_value(v) for k, v in asdict(self).items()}


def render_value(v: float | None) -> str:
    return "n/a" if v is UNDEFINED else f"{v:.2f}"


def metrics(cm: ConfusionMatrix) -> Metrics:
    precision = _pct(cm.tp, cm.tp + cm.fp)
    recall = _pct(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = UNDEFINED
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return Metrics(
        precision=precision,
        recall=recall,
        oa=_pct(cm.tp + cm.tn, cm.total),
        f1=f1,
        iou=_pct(cm.tp, cm.tp + cm.fp + cm.fn),
    )


def metrics_table(m: Metrics) -> str:
    r = m.rendered()
    header = "  ".join(f"{k.upper() if k in ('oa', 'f1', 'iou') else k.title():>9}" for k in r)
    values = "  ".join(f"{v:>9}" for v in r.values())
    return header + "\n" + values


@dataclass(frozen=True)
class TimingReport:
    rows: list[tuple[str, float]]     # (stage, ms) in execution order
    total_ms: float
    training_ms: float
    inference_ms: float

    def to_dict(self) -> dict:
        return {
            "stages_ms": {name: round(ms, 3) for name, ms in self.rows},
            "stage_sum_ms": round(sum(ms for _, ms in self.rows), 3),
            "total_ms": round(self.total_ms, 3),
            "training_ms": round(self.training_ms, 3),
            "inference_ms": round(self.inference_ms, 3),
            "training_plus_inference_ms": round(self.training_ms + self.inference_ms, 3),
        }

    def table(self) -> str:
        width = max([len(n) for n, _ in self.rows] + [len("training (forest fit)")])
        lines = [f"{'stage':<{width}}  {'ms':>10}"]
        lines += [f"{name:<{width}}  {ms:>10.1f}" for name, ms in self.rows]
        lines.append(f"{'total':<{width}}  {self.total_ms:>10.1f}")
        lines.append(f"{'training (forest fit)':<{width}}  {self.training_ms:>10.1f}")
        lines.append(f"{'inference (classify)':<{width}}  {self.inference_ms:>10.1f}")
        return "\n".join(lines)


def timing_report(d: DiagnosticsBundle | dict[str, float]) -> TimingReport:
    """Per-stage wall-clock plus the forest training/inference split.

    The total is the larger of the recorded end-to-end time and the stage
    sum, so it never undercuts any single stage.
    """
    timings = d if isinstance(d, dict) else d.timings_ms
    recorded = 0.0 if isinstance(d, dict) else d.total_ms
    rows = [(name, float(ms)) for name, ms in timings.items()]
    total = max(recorded, sum(ms for _, ms in rows))
    return TimingReport(
        rows=rows,
        total_ms=total,
        training_ms=float(timings.get(TRAINING_STAGE, 0.0)),
        inference_ms=float(timings.get(INFERENCE_STAGE, 0.0)),
    )
