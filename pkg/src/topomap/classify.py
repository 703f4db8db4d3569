"""Nearest-sample unit labeling and BMU-label classification."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidArgument
from .metrics import bmu_indices


@dataclass
class LabeledMap:
    weights: np.ndarray
    unit_labels: np.ndarray
    trained: object = None  # the TrainedMap this labeling came from, if any

    def predict(self, samples) -> np.ndarray:
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if samples.shape[1] != self.weights.shape[1]:
            raise InvalidArgument("sample and weight dimensions differ")
        best, _ = bmu_indices(self.weights, samples)
        return self.unit_labels[best]


def _weights(trained) -> np.ndarray:
    if hasattr(trained, "state"):
        return trained.state.weights
    return getattr(trained, "weights", trained)


def label_units(trained, dataset) -> LabeledMap:
    """Give every unit the label of its nearest training sample (lowest index on ties)."""
    if dataset.labels is None:
        raise InvalidArgument("label_units needs a labeled dataset")
    weights = np.asarray(_weights(trained), dtype=np.float64)
    if weights.shape[1] != dataset.d:
        raise InvalidArgument("sample and weight dimensions differ")
    nearest = np.empty(len(weights), np.int64)
    step = max(1, (1 << 22) // max(len(dataset), 1))
    for start in range(0, len(weights), step):
        dist = cdist(weights[start:start + step], dataset.samples, "sqeuclidean")
        nearest[start:start + step] = dist.argmin(axis=1)
    return LabeledMap(weights, dataset.labels[nearest].copy(),
                      trained if hasattr(trained, "state") else None)


def predict(labeled: LabeledMap, sample) -> int:
    return int(labeled.predict(sample)[0])


def confusion_matrix(y_true, y_pred, classes=None):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if classes is None:
        classes = np.unique(np.concatenate([y_true, y_pred]))
    classes = np.asarray(classes)
    index = {c: k for k, c in enumerate(classes.tolist())}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true.tolist(), y_pred.tolist()):
        if t in index and p in index:
            cm[index[t], index[p]] += 1
    return cm, classes


@dataclass
class ClassificationReport:
    precision: float
    recall: float
    average: str
    classes: np.ndarray
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    confusion: np.ndarray  # rows: true class, columns: predicted (incl. extra predicted classes)
    confusion_labels: np.ndarray

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "average": self.average,
            "per_class": {
                str(c): {"precision": float(p), "recall": float(r)}
                for c, p, r in zip(self.classes.tolist(), self.per_class_precision,
                                   self.per_class_recall)
            },
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def confusion_to_csv(self, path) -> None:
        labels = self.confusion_labels.tolist()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["true\\pred"] + labels)
            for lab, row in zip(labels, self.confusion.tolist()):
                w.writerow([lab] + row)


def score(y_true, y_pred, average: str = "macro") -> ClassificationReport:
    """Precision/recall over the classes present in ``y_true``.

    Classes that are never predicted contribute precision 0.
    """
    if average not in ("macro", "micro"):
        raise InvalidArgument(f"unknown average {average!r}")
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    present = np.unique(y_true)
    cm, labels = confusion_matrix(y_true, y_pred)
    pos = {c: k for k, c in enumerate(labels.tolist())}
    cols = [pos[c] for c in present.tolist()]
    tp = cm[cols, cols].astype(float)
    predicted = cm[:, cols].sum(axis=0).astype(float)
    actual = cm[cols, :].sum(axis=1).astype(float)
    prec = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    rec = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    if average == "macro":
        p, r = float(prec.mean()), float(rec.mean())
    else:
        # micro over the present classes: predictions of absent classes count as misses
        p = float(tp.sum() / max(len(y_pred), 1))
        r = float(tp.sum() / actual.sum())
    return ClassificationReport(p, r, average, present, prec, rec, cm, labels)


def evaluate(labeled: LabeledMap, dataset, average: str = "macro") -> ClassificationReport:
    if dataset.labels is None:
        raise InvalidArgument("evaluate needs a labeled dataset")
    return score(dataset.labels, labeled.predict(dataset.samples), average)
