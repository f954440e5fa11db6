"""Confusion-matrix accumulation and the mIoU / Avg / SeK / Fscd report."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ShapeError, ValidationError

METRIC_KEYS = ("miou", "avg", "sek", "fscd")
METRIC_LABELS = {"miou": "mIoU", "avg": "Avg", "sek": "SeK", "fscd": "Fscd"}


@dataclass
class MetricReport:
    miou: float
    avg: float
    sek: float
    fscd: float

    def as_dict(self):
        return {k: getattr(self, k) for k in METRIC_KEYS}

    def to_text(self):
        return " ".join(f"{METRIC_LABELS[k]}={getattr(self, k):.2f}" for k in METRIC_KEYS)

    @classmethod
    def from_text(cls, text):
        pairs = dict(item.split("=", 1) for item in text.split())
        inverse = {v: k for k, v in METRIC_LABELS.items()}
        return cls(**{inverse[k]: float(v) for k, v in pairs.items()})


def _ratio(num, den, vacuous):
    if den == 0:
        return 1.0 if vacuous else 0.0
    return num / den


class ConfusionMatrix:
    """(N+1) x (N+1) counts; row = ground truth, column = prediction, 0 = no-change."""

    def __init__(self, num_classes, counts=None):
        self.num_classes = int(num_classes)
        size = self.num_classes + 1
        if counts is None:
            counts = np.zeros((size, size), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (size, size):
            raise ShapeError(f"expected a {size}x{size} matrix, got {counts.shape}")
        if (counts < 0).any():
            raise ValidationError("confusion counts must be non-negative")
        self.counts = counts

    @property
    def total(self):
        return int(self.counts.sum())

    def _check_labels(self, arr, name):
        if arr.size and (arr.min() < 0 or arr.max() > self.num_classes):
            raise ValidationError(f"{name} has labels outside 0..{self.num_classes}")

    def update(self, pred, gt):
        """Add counts for one phase. Arrays of any matching shape."""
        pred = np.asarray(pred).astype(np.int64, copy=False).ravel()
        gt = np.asarray(gt).astype(np.int64, copy=False).ravel()
        if pred.shape != gt.shape:
            raise ShapeError(f"prediction and ground truth sizes differ: {pred.size} vs {gt.size}")
        self._check_labels(pred, "prediction")
        self._check_labels(gt, "ground truth")
        size = self.num_classes + 1
        self.counts += np.bincount(gt * size + pred, minlength=size * size).reshape(size, size)
        return self

    def accumulate(self, pred1, pred2, gt1, gt2):
        shapes = {np.shape(a) for a in (pred1, pred2, gt1, gt2)}
        if len(shapes) != 1:
            raise ShapeError(f"all four maps must share one shape, got {sorted(shapes)}")
        self.update(pred1, gt1)
        self.update(pred2, gt2)
        return self

    def merge(self, other):
        if other.num_classes != self.num_classes:
            raise ShapeError(
                f"cannot merge matrices for {self.num_classes} and {other.num_classes} classes"
            )
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    __add__ = merge

    def __eq__(self, other):
        return (
            isinstance(other, ConfusionMatrix)
            and other.num_classes == self.num_classes
            and np.array_equal(other.counts, self.counts)
        )

    def report(self):
        return compute_report(self)


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    return a.merge(b)


def compute_report(cm: ConfusionMatrix) -> MetricReport:
    q = cm.counts.astype(np.float64)
    total = q.sum()
    if total == 0:
        raise ValidationError("cannot report on an empty confusion matrix")

    avg = np.trace(q) / total

    q00 = q[0, 0]
    iou_nc = _ratio(q00, q[0, :].sum() + q[:, 0].sum() - q00, vacuous=True)
    iou_c = _ratio(q[1:, 1:].sum(), total - q00, vacuous=True)
    miou = (iou_nc + iou_c) / 2

    q_hat = q.copy()
    q_hat[0, 0] = 0
    n_hat = q_hat.sum()
    if n_hat == 0:
        sek = 0.0
    else:
        rho = np.trace(q_hat) / n_hat
        eta = float((q_hat.sum(axis=1) * q_hat.sum(axis=0)).sum()) / n_hat**2
        kappa = _ratio(rho - eta, 1 - eta, vacuous=True)
        sek = math.exp(iou_c - 1) * kappa

    tp = np.trace(q[1:, 1:])
    pred_changed = q[:, 1:].sum()
    gt_changed = q[1:, :].sum()
    nothing_changed = pred_changed == 0 and gt_changed == 0
    precision = _ratio(tp, pred_changed, nothing_changed)
    recall = _ratio(tp, gt_changed, nothing_changed)
    fscd = _ratio(2 * precision * recall, precision + recall, nothing_changed)

    return MetricReport(
        miou=100 * float(miou), avg=100 * float(avg), sek=100 * float(sek), fscd=100 * float(fscd)
    )
