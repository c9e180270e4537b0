"""Classification and semantic-recovery accuracy suite."""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .clustering import hungarian_map
from .data import Dataset, target_seen_mask

log = logging.getLogger(__name__)


class MetricError(Exception):
    pass


@dataclass
class EvalReport:
    acc_s: float
    acc_u: float
    acc_h: float
    sr_s: float
    sr_u: float
    sr_h: float
    tau: float
    label_map: dict                  # predicted unseen id -> true class id
    per_class_acc: dict = field(default_factory=dict)
    per_class_sr: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({
            "acc_s": self.acc_s, "acc_u": self.acc_u, "acc_h": self.acc_h,
            "sr_s": self.sr_s, "sr_u": self.sr_u, "sr_h": self.sr_h,
            "tau": self.tau,
            "label_map": {str(k): v for k, v in self.label_map.items()},
            "per_class_acc": {str(k): v for k, v in self.per_class_acc.items()},
            "per_class_sr": {str(k): v for k, v in self.per_class_sr.items()},
        }, indent=2)

    def format_table(self):
        head = f"{'Acc_s':>7} {'Acc_u':>7} {'Acc_h':>7} | " \
               f"{'SR_s':>7} {'SR_u':>7} {'SR_h':>7}"
        row = f"{self.acc_s:7.3f} {self.acc_u:7.3f} {self.acc_h:7.3f} | " \
              f"{self.sr_s:7.3f} {self.sr_u:7.3f} {self.sr_h:7.3f}"
        return head + "\n" + row


def per_class_accuracy(y_true, y_pred, classes):
    """Mean over classes of the within-class hit rate. Classes with no
    true samples are excluded with a warning."""
    accs, table = [], {}
    for k in classes:
        members = y_true == k
        n = int(members.sum())
        if n == 0:
            log.warning("per-class accuracy: class %d has no samples, "
                        "excluded", k)
            continue
        acc = float((y_pred[members] == k).sum()) / n
        accs.append(acc)
        table[int(k)] = acc
    if not accs:
        raise MetricError("no classes with samples")
    return float(np.mean(accs)), table


def unseen_accuracy(y_true, y_pred, k_s, k_t):
    """Per-class accuracy over ground-truth-unseen samples after the
    count-maximizing permutation of predicted unseen cluster ids."""
    if y_true.size == 0:
        raise MetricError("no unseen samples to evaluate")
    u = k_t - k_s
    confusion = np.zeros((u, u), dtype=np.int64)
    for yp, yt in zip(y_pred, y_true):
        if yp >= k_s:
            confusion[yp - k_s, yt - k_s] += 1
    mapping = hungarian_map(confusion)
    label_map = {k_s + i: k_s + j for i, j in mapping.items()}
    mapped = np.array([label_map.get(int(yp), -1) for yp in y_pred])
    acc, table = per_class_accuracy(y_true, mapped, range(k_s, k_t))
    return acc, label_map, table


def harmonic(a, b):
    """2ab/(a+b), 0 when both are 0."""
    return 0.0 if a + b == 0 else 2.0 * a * b / (a + b)


def evaluate(ds: Dataset, inf) -> EvalReport:
    """Classification (Acc_s/Acc_u/Acc_h) and semantic recovery
    (SR_s/SR_u/SR_h) metrics over the labeled target set."""
    if ds.y_t is None or ds.a_full is None:
        raise MetricError("evaluation needs target labels and the full "
                          "attribute matrix")
    seen = target_seen_mask(ds)
    acc_s, tbl_s = per_class_accuracy(ds.y_t[seen], inf.y_hat[seen],
                                      range(ds.k_s))
    acc_u, label_map, tbl_u = unseen_accuracy(ds.y_t[~seen], inf.y_hat[~seen],
                                              ds.k_s, ds.k_t)
    sr_s, sr_tbl_s = per_class_accuracy(ds.y_t[seen], inf.y_tilde[seen],
                                        range(ds.k_s))
    sr_u, sr_tbl_u = per_class_accuracy(ds.y_t[~seen], inf.y_tilde[~seen],
                                        range(ds.k_s, ds.k_t))
    return EvalReport(
        acc_s=acc_s, acc_u=acc_u, acc_h=harmonic(acc_s, acc_u),
        sr_s=sr_s, sr_u=sr_u, sr_h=harmonic(sr_s, sr_u),
        tau=float(inf.tau), label_map=label_map,
        per_class_acc={**tbl_s, **tbl_u},
        per_class_sr={**sr_tbl_s, **sr_tbl_u})
