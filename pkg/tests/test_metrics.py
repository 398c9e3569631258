import numpy as np
import pytest

from errors import DataError, ShapeError
from training.metrics import CDMetrics, cd_metrics


def test_count_fixture():
    m = CDMetrics(tp=90, fp=10, fn=30, tn=870)
    assert m.precision == pytest.approx(0.9)
    assert m.recall == pytest.approx(0.75)
    assert m.f1 == pytest.approx(0.8181818, abs=1e-7)
    assert m.iou == pytest.approx(0.6923077, abs=1e-7)


def test_one_of_each():
    m = CDMetrics(tp=1, fp=1, fn=1, tn=1)
    assert (m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5)
    assert m.iou == pytest.approx(1 / 3)


def test_no_positive_predictions_gives_zero_scores():
    m = cd_metrics(np.zeros((4, 4), dtype=np.uint8), np.eye(4, dtype=np.uint8))
    assert (m.precision, m.recall, m.f1, m.iou) == (0.0, 0.0, 0.0, 0.0)


def test_perfect_prediction():
    gt = np.eye(5, dtype=np.uint8)
    m = cd_metrics(gt, gt)
    assert (m.tp, m.fp, m.fn, m.tn) == (5, 0, 0, 20)
    assert m.f1 == 1.0
    assert m.mean_f1 == 1.0


def test_counts_add_up():
    a = CDMetrics(tp=1, fp=2, fn=3, tn=4)
    b = CDMetrics(tp=10, fp=20, fn=30, tn=40)
    assert a + b == CDMetrics(tp=11, fp=22, fn=33, tn=44)


def test_row_has_four_scores():
    assert set(CDMetrics(tp=1).row()) == {"precision", "recall", "f1", "iou"}


def test_input_validation():
    with pytest.raises(ShapeError):
        cd_metrics(np.zeros((2, 2)), np.zeros((3, 2)))
    with pytest.raises(DataError):
        cd_metrics(np.full((2, 2), 2), np.zeros((2, 2)))


def test_iou_follows_from_f1():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        tp, fp, fn, tn = (int(v) for v in rng.integers(0, 500, size=4))
        m = CDMetrics(tp=tp, fp=fp, fn=fn, tn=tn)
        assert abs(m.iou - m.f1 / (2 - m.f1)) <= 1e-12
