"""Map quality (Q, T), search error (F), and cascade/update statistics."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidArgument

LOG_COLUMNS = (
    "i", "sample_idx", "gmu", "bmu", "q_gmu",
    "cascade_firings", "cascade_weight_updates", "p_i", "l_c_i",
)


@dataclass
class EventLog:
    """Per-sample training records.

    ``bmu`` is -1 where auditing was off.  When the GMU attains the exact
    optimum distance the GMU id is recorded as the BMU.
    """

    n_units: int
    i: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    sample_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    gmu: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    bmu: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    q_gmu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cascade_firings: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    cascade_weight_updates: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    p_i: np.ndarray = field(default_factory=lambda: np.zeros(0))
    l_c_i: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def empty(cls, n_units: int, length: int) -> "EventLog":
        return cls(
            n_units,
            i=np.arange(length, dtype=np.int64),
            sample_idx=np.zeros(length, np.int64),
            gmu=np.zeros(length, np.int64),
            bmu=np.full(length, -1, np.int64),
            q_gmu=np.zeros(length),
            cascade_firings=np.zeros(length, np.int64),
            cascade_weight_updates=np.zeros(length, np.int64),
            p_i=np.zeros(length),
            l_c_i=np.zeros(length),
        )

    def __len__(self) -> int:
        return len(self.i)

    @property
    def audited(self) -> np.ndarray:
        return self.bmu >= 0

    @property
    def fractional_sizes(self) -> np.ndarray:
        return self.cascade_firings / self.n_units

    def to_csv(self, path) -> None:
        cols = [getattr(self, c) for c in LOG_COLUMNS]
        with open(path, "w", newline="") as fh:
            fh.write(f"# n_units={self.n_units}\n")
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for row in zip(*(c.tolist() for c in cols)):
                row = list(row)
                if row[3] < 0:
                    row[3] = ""
                w.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "EventLog":
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.startswith("# n_units="):
                raise InvalidArgument(f"{path}: missing n_units header")
            n_units = int(first.split("=", 1)[1])
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if tuple(header) != LOG_COLUMNS:
            raise InvalidArgument(f"{path}: unexpected columns {header}")
        cols = list(zip(*body)) if body else [()] * len(LOG_COLUMNS)
        out = {}
        for name, col in zip(LOG_COLUMNS, cols):
            if name == "bmu":
                out[name] = np.array([int(v) if v != "" else -1 for v in col], np.int64)
            elif name in ("q_gmu", "p_i", "l_c_i"):
                out[name] = np.array(col, dtype=float)
            else:
                out[name] = np.array(col, dtype=np.int64)
        return cls(n_units, **out)


@dataclass
class QualityReport:
    Q: float
    T: float
    F: float | None
    max_fractional_cascade: float
    updates_per_sample: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _chunks(n_rows: int, n_cols: int, budget: int = 1 << 22):
    step = max(1, budget // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


def _weights(map_or_weights) -> np.ndarray:
    return getattr(map_or_weights, "weights", map_or_weights)


def _samples(dataset) -> np.ndarray:
    return getattr(dataset, "samples", dataset)


def bmu_indices(weights, samples, second: bool = False):
    """Exact BMU (and optionally second-best unit) per sample; ties -> lowest id."""
    weights = np.asarray(weights)
    samples = np.asarray(samples)
    best = np.empty(len(samples), np.int64)
    best_d = np.empty(len(samples))
    runner = np.empty(len(samples), np.int64) if second else None
    for sl in _chunks(len(samples), len(weights)):
        dist = cdist(samples[sl], weights, "sqeuclidean")
        b = dist.argmin(axis=1)
        rows = np.arange(len(b))
        best[sl] = b
        best_d[sl] = dist[rows, b]
        if second:
            dist[rows, b] = np.inf
            runner[sl] = dist.argmin(axis=1)
    return (best, np.sqrt(best_d), runner) if second else (best, np.sqrt(best_d))


def quantization_error(state, dataset) -> float:
    """Mean Euclidean distance from each sample to its BMU's weight."""
    samples = _samples(dataset)
    if len(samples) == 0:
        raise InvalidArgument("quantization error of an empty dataset")
    weights = _weights(state)
    if samples.shape[1] != weights.shape[1]:
        raise InvalidArgument("sample and weight dimensions differ")
    _, dist = bmu_indices(weights, samples)
    return float(dist.mean())


def topological_error(state, topology, dataset) -> float:
    """Fraction of samples whose best and second-best units are not lattice neighbors."""
    weights = _weights(state)
    if len(weights) < 2:
        raise InvalidArgument("topological error needs at least two units")
    samples = _samples(dataset)
    if len(samples) == 0:
        raise InvalidArgument("topological error of an empty dataset")
    best, _, second = bmu_indices(weights, samples, second=True)
    n_side = topology.n_side if hasattr(topology, "n_side") else int(topology)
    dx = np.abs(best % n_side - second % n_side)
    dy = np.abs(best // n_side - second // n_side)
    return float(np.mean(dx + dy > 1))


def search_error(log: EventLog, window: int = 1000) -> float:
    if window < 1:
        raise InvalidArgument("window must be positive")
    if len(log) < window:
        raise InvalidArgument(f"log has {len(log)} records, fewer than window={window}")
    tail = slice(len(log) - window, len(log))
    bmu = log.bmu[tail]
    if np.any(bmu < 0):
        raise InvalidArgument("BMU auditing was not enabled for the last window")
    return float(np.mean(log.gmu[tail] != bmu))


def cascade_quantile_trajectory(log: EventLog, window_count: int = 100,
                                quantile: float = 0.999):
    """Mean of the fractional cascade sizes at or above ``quantile`` per window.

    Returns ``(centers, values)``: the mean training index and the tail mean
    for each of ``window_count`` contiguous windows.
    """
    if len(log) == 0:
        raise InvalidArgument("empty log")
    sizes = log.fractional_sizes
    centers, values = [], []
    for idx in np.array_split(np.arange(len(log)), window_count):
        if len(idx) == 0:
            continue
        a = sizes[idx]
        thr = np.quantile(a, quantile)
        centers.append(float(log.i[idx].mean()))
        values.append(float(a[a >= thr].mean()))
    return np.array(centers), np.array(values)


def trajectory_to_csv(path, centers, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window_center", "mean_top_fractional_cascade"])
        w.writerows(zip(np.asarray(centers).tolist(), np.asarray(values).tolist()))


def updates_per_sample(log: EventLog) -> float:
    if len(log) == 0:
        raise InvalidArgument("empty log")
    return float(np.mean(1 + log.cascade_weight_updates))


def max_fractional_cascade(log: EventLog) -> float:
    return float(log.fractional_sizes.max()) if len(log) else 0.0


def quality_report(state, topology, dataset, log: EventLog | None = None,
                   window: int = 1000) -> QualityReport:
    F = None
    if log is not None and len(log) >= window and np.all(log.bmu[-window:] >= 0):
        F = search_error(log, window)
    return QualityReport(
        Q=quantization_error(state, dataset),
        T=topological_error(state, topology, dataset),
        F=F,
        max_fractional_cascade=max_fractional_cascade(log) if log is not None else 0.0,
        updates_per_sample=updates_per_sample(log) if log is not None and len(log) else 1.0,
    )
