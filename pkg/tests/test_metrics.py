"""Accuracy metrics against hand-computed fixtures."""

import json
import logging

import numpy as np
import pytest

from clusem import metrics
from clusem.data import Dataset


# ----------------------------------------------------- per-class accuracy

def test_per_class_accuracy_hand_fixture():
    y_true = np.array([0, 0, 0, 0, 1, 1])
    y_pred = np.array([0, 0, 0, 1, 1, 0])
    acc, table = metrics.per_class_accuracy(y_true, y_pred, range(2))
    # class 0: 3/4, class 1: 1/2 -> mean 0.625
    assert acc == pytest.approx(0.625, abs=1e-12)
    assert table == {0: 0.75, 1: 0.5}


def test_per_class_accuracy_weights_classes_not_samples():
    # 9 correct of 10 overall, but the small class is all wrong
    y_true = np.array([0] * 9 + [1])
    y_pred = np.array([0] * 9 + [0])
    acc, _ = metrics.per_class_accuracy(y_true, y_pred, range(2))
    assert acc == pytest.approx(0.5, abs=1e-12)


def test_per_class_accuracy_skips_empty_class(caplog):
    y_true = np.array([0, 0])
    y_pred = np.array([0, 1])
    with caplog.at_level(logging.WARNING, logger="clusem.metrics"):
        acc, table = metrics.per_class_accuracy(y_true, y_pred, range(3))
    assert acc == pytest.approx(0.5)
    assert 1 not in table and 2 not in table
    assert "excluded" in caplog.text


def test_per_class_accuracy_all_empty():
    with pytest.raises(metrics.MetricError):
        metrics.per_class_accuracy(np.array([5]), np.array([5]), range(3))


# -------------------------------------------------------- unseen accuracy

def test_unseen_accuracy_permuted_clusters():
    # k_s=2, k_t=4; predicted cluster 2 is true class 3 and vice versa
    y_true = np.array([2, 2, 3, 3])
    y_pred = np.array([3, 3, 2, 2])
    acc, label_map, _ = metrics.unseen_accuracy(y_true, y_pred, 2, 4)
    assert acc == pytest.approx(1.0)
    assert label_map == {2: 3, 3: 2}


def test_unseen_accuracy_seen_predictions_count_wrong():
    y_true = np.array([2, 2, 3, 3])
    y_pred = np.array([0, 2, 3, 1])
    acc, label_map, _ = metrics.unseen_accuracy(y_true, y_pred, 2, 4)
    # identity map is optimal; one hit per class of two samples
    assert label_map == {2: 2, 3: 3}
    assert acc == pytest.approx(0.5)


def test_unseen_accuracy_empty():
    with pytest.raises(metrics.MetricError):
        metrics.unseen_accuracy(np.array([]), np.array([]), 2, 4)


# ---------------------------------------------------------------- harmonic

def test_harmonic_values():
    assert metrics.harmonic(0.0, 0.0) == 0.0
    assert metrics.harmonic(1.0, 1.0) == 1.0
    assert metrics.harmonic(0.5, 0.0) == 0.0
    assert metrics.harmonic(0.4, 0.6) == pytest.approx(0.48, abs=1e-12)


def test_harmonic_published_operating_point():
    assert metrics.harmonic(0.828, 0.476) == pytest.approx(0.605, abs=1e-3)


def test_harmonic_symmetric():
    assert metrics.harmonic(0.3, 0.9) == metrics.harmonic(0.9, 0.3)


# ---------------------------------------------------------------- evaluate

class FakeInference:
    def __init__(self, y_hat, y_tilde, tau=0.5):
        self.y_hat = np.asarray(y_hat)
        self.y_tilde = np.asarray(y_tilde)
        self.tau = tau


def _fixture_dataset():
    """10 target samples: classes 0,1 seen (3+3), classes 2,3 unseen (2+2)."""
    y_t = np.array([0, 0, 0, 1, 1, 1, 2, 2, 3, 3])
    d = 4
    a_full = np.eye(4)
    return Dataset(x_s=np.zeros((2, 5)), y_s=np.array([0, 1]),
                   a_seen=a_full[:2], x_t=np.zeros((10, 5)),
                   k_s=2, k_t=4, d=d, y_t=y_t, a_full=a_full)


def test_evaluate_hand_fixture():
    ds = _fixture_dataset()
    # classification: class 0 -> 2/3, class 1 -> 3/3; unseen clusters are
    # swapped, class 2 -> 2/2 after mapping, class 3 -> 1/2
    y_hat = np.array([0, 0, 1, 1, 1, 1, 3, 3, 2, 0])
    # recovery: class 0 -> 3/3, class 1 -> 2/3, class 2 -> 1/2, class 3 -> 0/2
    y_tilde = np.array([0, 0, 0, 1, 1, 0, 2, 1, 0, 1])
    rep = metrics.evaluate(ds, FakeInference(y_hat, y_tilde, tau=0.7))

    acc_s = (2 / 3 + 1.0) / 2
    acc_u = (1.0 + 0.5) / 2
    assert rep.acc_s == pytest.approx(acc_s, abs=1e-12)
    assert rep.acc_u == pytest.approx(acc_u, abs=1e-12)
    assert rep.acc_h == pytest.approx(metrics.harmonic(acc_s, acc_u),
                                      abs=1e-12)
    sr_s = (1.0 + 2 / 3) / 2
    sr_u = (0.5 + 0.0) / 2
    assert rep.sr_s == pytest.approx(sr_s, abs=1e-12)
    assert rep.sr_u == pytest.approx(sr_u, abs=1e-12)
    assert rep.sr_h == pytest.approx(metrics.harmonic(sr_s, sr_u), abs=1e-12)
    assert rep.tau == 0.7
    assert rep.label_map == {2: 3, 3: 2}
    assert rep.per_class_acc[0] == pytest.approx(2 / 3)
    assert rep.per_class_sr[3] == 0.0


def test_evaluate_requires_labels():
    ds = _fixture_dataset()
    ds.y_t = None
    with pytest.raises(metrics.MetricError):
        metrics.evaluate(ds, FakeInference(np.zeros(10, int),
                                           np.zeros(10, int)))


def test_report_json_roundtrip():
    ds = _fixture_dataset()
    y_hat = np.array([0, 0, 1, 1, 1, 1, 3, 3, 2, 0])
    y_tilde = np.array([0, 0, 0, 1, 1, 0, 2, 1, 0, 1])
    rep = metrics.evaluate(ds, FakeInference(y_hat, y_tilde))
    blob = json.loads(rep.to_json())
    assert blob["acc_h"] == pytest.approx(rep.acc_h)
    assert blob["label_map"] == {"2": 3, "3": 2}


def test_report_format_table():
    ds = _fixture_dataset()
    rep = metrics.evaluate(ds, FakeInference(ds.y_t, ds.y_t))
    table = rep.format_table()
    assert "Acc_h" in table and "SR_h" in table
    assert "1.000" in table
