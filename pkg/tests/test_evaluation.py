import numpy as np
import pytest

from dismap.changedetect.pipeline import DiagnosticsBundle
from dismap.errors import GridMismatchError
from dismap.evaluation import UNDEFINED, ConfusionMatrix, confusion, metrics, metrics_table, timing_report
from dismap.raster import ChangeMap


def cmap(values, valid=None):
    return ChangeMap(np.asarray(values, np.uint8), valid=valid)


def test_confusion_examples():
    gt = np.zeros((10, 100), np.uint8)
    gt[0] = 1
    assert confusion(cmap(gt), cmap(gt)) == ConfusionMatrix(100, 0, 0, 900)
    assert confusion(cmap(np.zeros_like(gt)), cmap(gt)) == ConfusionMatrix(0, 0, 100, 900)


def test_confusion_grid_mismatch():
    with pytest.raises(GridMismatchError):
        confusion(cmap(np.zeros((3, 3))), cmap(np.zeros((3, 4))))


@pytest.mark.parametrize("seed", range(10))
def test_confusion_matches_tally(seed):
    rng = np.random.default_rng(seed)
    p, g = (rng.uniform(size=(2, 20, 30)) < 0.3).astype(np.uint8)
    valid = rng.uniform(size=(20, 30)) < 0.9
    got = confusion(cmap(p, valid), cmap(g))
    tally = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for r in range(20):
        for c in range(30):
            if not valid[r, c]:
                continue
            key = ("t" if p[r, c] == g[r, c] else "f") + ("p" if p[r, c] else "n")
            tally[key] += 1
    assert got == ConfusionMatrix(**tally)
    swapped = confusion(cmap(g, valid), cmap(p))
    assert (swapped.fp, swapped.fn, swapped.tp, swapped.tn) == (got.fn, got.fp, got.tp, got.tn)
    assert metrics(swapped).oa == metrics(got).oa
    assert 0 <= metrics(got).oa <= 100


def test_metric_examples():
    m = metrics(ConfusionMatrix(1, 1, 0, 0))
    assert (m.precision, m.recall, m.oa) == (50.0, 100.0, 50.0)
    m = metrics(ConfusionMatrix(0, 0, 0, 10))
    assert m.precision is UNDEFINED and m.recall is UNDEFINED and m.f1 is UNDEFINED and m.iou is UNDEFINED
    assert m.oa == 100.0
    assert m.rendered()["precision"] == "n/a"
    m = metrics(ConfusionMatrix(5, 0, 0, 5))
    assert m.to_dict() == {"precision": 100.0, "recall": 100.0, "oa": 100.0, "f1": 100.0, "iou": 100.0}


def test_all_zero_counts_are_undefined():
    m = metrics(ConfusionMatrix(0, 0, 0, 0))
    assert all(v is UNDEFINED for v in m.to_dict().values())
    assert "n/a" in metrics_table(m)


def test_f1_undefined_when_precision_and_recall_zero():
    m = metrics(ConfusionMatrix(0, 3, 4, 1))
    assert m.precision == 0.0 and m.recall == 0.0 and m.f1 is UNDEFINED and m.iou == 0.0


def test_timing_report_examples():
    r = timing_report({"a": 5.0, "b": 10.0, "c": 15.0})
    assert r.total_ms == 30.0 and r.total_ms >= max(ms for _, ms in r.rows)
    assert timing_report(DiagnosticsBundle()).total_ms == 0
    assert timing_report({}).to_dict()["stage_sum_ms"] == 0


def test_timing_report_training_inference_split():
    d = DiagnosticsBundle(timings_ms={"train_random_forest": 12.5, "classify": 3.0, "other": 1.0},
                          total_ms=17.0)
    r = timing_report(d)
    assert (r.training_ms, r.inference_ms, r.total_ms) == (12.5, 3.0, 17.0)
    assert "training (forest fit)" in r.table()
