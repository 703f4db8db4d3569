"""Experiment drivers behind the CLI: single runs, parameter sweeps, and the
cascade-size collapse study.  Every run writes a manifest next to its outputs."""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .classify import evaluate, label_units
from .dataset import (Dataset, apply_normalization, load_csv, load_idx, normalize,
                      synthetic_square, train_test_split)
from .engine import TrainConfig, TrainedMap, train
from .errors import InvalidArgument
from .metrics import cascade_quantile_trajectory, quality_report, trajectory_to_csv

log = logging.getLogger(__name__)

SEED_STRIDE = 1000  # repeat r uses base seed + r * SEED_STRIDE


# -- datasets -------------------------------------------------------------------

def load_dataset(spec: str, seed: int = 0, normalize_data: bool = True) -> Dataset:
    """Resolve a dataset spec string.

    ``synthetic:square:N[:D]``
        N uniform samples in the unit hypercube of dimension D (default 2).
    ``idx:IMAGES[:LABELS]``
        IDX image/label files (optionally gzipped).
    ``csv:PATH[:LABEL_COLUMN]`` or a bare ``PATH.csv``
        comma-separated numbers; the label column defaults to the last one,
        ``none`` disables labels.
    """
    if spec.startswith("synthetic:"):
        parts = spec.split(":")
        if len(parts) < 3 or parts[1] != "square":
            raise InvalidArgument(f"bad synthetic dataset spec {spec!r}")
        try:
            n = int(parts[2])
            d = int(parts[3]) if len(parts) > 3 else 2
        except ValueError as exc:
            raise InvalidArgument(f"bad synthetic dataset spec {spec!r}") from exc
        return synthetic_square(n, seed=seed, d=d)
    if spec.startswith("idx:"):
        parts = spec[4:].split(":")
        ds = load_idx(parts[0], parts[1] if len(parts) > 1 and parts[1] else None)
    else:
        path, label = spec[4:] if spec.startswith("csv:") else spec, -1
        head, sep, tail = path.rpartition(":")
        if sep and (tail.lstrip("-").isdigit() or tail == "none"):
            path, label = head, (None if tail == "none" else int(tail))
        ds = load_csv(path, label_column=label)
    return normalize(ds) if normalize_data else ds


# -- manifests and per-run outputs --------------------------------------------------

def manifest(config: TrainConfig, command: str, dataset_spec: str, extra=None) -> dict:
    return {
        "command": command,
        "dataset": dataset_spec,
        "config": config.resolved(),
        "seeds": {
            "topology": config.seed_topology,
            "weights": config.seed_weights,
            "training": config.seed_training,
        },
        "backend": BACKEND,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        **(extra or {}),
    }


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def run_single(config: TrainConfig, dataset: Dataset, out_dir, *, command="train",
               dataset_spec="", weights_format="bin", write_log=True, window=1000):
    """Train once and write map/, log.csv, report.json and manifest.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "manifest.json", manifest(config, command, dataset_spec))
    t0 = time.perf_counter()
    trained = train(config, dataset)
    elapsed = time.perf_counter() - t0
    report = quality_report(trained.state, trained.topology, dataset, trained.log,
                            window=min(window, max(len(trained.log), 1)))
    trained.save(out_dir / "map", weights_format=weights_format)
    if write_log:
        trained.log.to_csv(out_dir / "log.csv")
    payload = report.to_dict()
    payload["train_seconds"] = elapsed
    if hasattr(trained, "runtime_stats"):
        payload["runtime"] = trained.runtime_stats
    write_json(out_dir / "report.json", payload)
    return trained, report


def _repeat_configs(config: TrainConfig, repeats: int, base_seed: int):
    if repeats < 1:
        raise InvalidArgument("repeats must be >= 1")
    return [config.with_seed(base_seed + r * SEED_STRIDE) for r in range(repeats)]


def _mean_std(values):
    arr = np.asarray([np.nan if v is None else v for v in values], dtype=float)
    return float(np.mean(arr)), float(np.std(arr))


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# -- sweeps ---------------------------------------------------------------------------

def sweep_e(config, dataset, e_factors, out_dir, repeats=1, base_seed=0,
            dataset_spec="", window=1000):
    """Search error F and topological error T against the exploration budget e = factor * N.

    BMU auditing is forced on for the last ``window`` samples.
    """
    out_dir = Path(out_dir)
    rows = []
    for factor in e_factors:
        e = max(0, int(round(factor * config.n_units)))
        fs, ts = [], []
        for r, cfg in enumerate(_repeat_configs(config, repeats, base_seed)):
            cfg = replace(cfg, e=e, audit_bmu=True, audit_window=window)
            _, rep = run_single(cfg, dataset, out_dir / f"e{factor:g}" / f"rep{r}",
                                command="sweep-e", dataset_spec=dataset_spec,
                                write_log=False, window=window)
            fs.append(rep.F)
            ts.append(rep.T)
        rows.append([factor, e, *_mean_std(fs), *_mean_std(ts), repeats])
    header = ["e_over_N", "e", "F_mean", "F_std", "T_mean", "T_std", "repeats"]
    write_rows(out_dir / "sweep_e.csv", header, rows)
    return header, rows


def sweep_cascade(config, dataset, c_m_values, c_d_values, out_dir, repeats=1,
                  base_seed=0, dataset_spec=""):
    out_dir = Path(out_dir)
    rows = []
    for c_m in c_m_values:
        for c_d in c_d_values:
            qs, ts, ups = [], [], []
            for r, cfg in enumerate(_repeat_configs(config, repeats, base_seed)):
                cfg = replace(cfg, c_m=c_m, c_d=c_d)
                _, rep = run_single(cfg, dataset, out_dir / f"cm{c_m:g}_cd{c_d:g}" / f"rep{r}",
                                    command="sweep-cascade", dataset_spec=dataset_spec,
                                    write_log=False)
                qs.append(rep.Q)
                ts.append(rep.T)
                ups.append(rep.updates_per_sample)
            rows.append([c_m, c_d, *_mean_std(qs), *_mean_std(ts), *_mean_std(ups), repeats])
    header = ["c_m", "c_d", "Q_mean", "Q_std", "T_mean", "T_std",
              "updates_per_sample_mean", "updates_per_sample_std", "repeats"]
    write_rows(out_dir / "sweep_cascade.csv", header, rows)
    return header, rows


def sweep_n(config, dataset, n_sides, out_dir, repeats=1, base_seed=0, dataset_spec="",
            window=1000):
    """Q, T and F against map size; e and i_max scale with N unless pinned in ``config``."""
    out_dir = Path(out_dir)
    rows = []
    for n_side in n_sides:
        qs, ts, fs = [], [], []
        for r, cfg in enumerate(_repeat_configs(config, repeats, base_seed)):
            cfg = replace(cfg, n_side=n_side, audit_bmu=True, audit_window=window)
            _, rep = run_single(cfg, dataset, out_dir / f"n{n_side}" / f"rep{r}",
                                command="sweep-n", dataset_spec=dataset_spec,
                                write_log=False, window=window)
            qs.append(rep.Q)
            ts.append(rep.T)
            fs.append(rep.F)
        rows.append([n_side * n_side, n_side, *_mean_std(qs), *_mean_std(ts),
                     *_mean_std(fs), repeats])
    header = ["N", "n_side", "Q_mean", "Q_std", "T_mean", "T_std", "F_mean", "F_std", "repeats"]
    write_rows(out_dir / "sweep_n.csv", header, rows)
    return header, rows


def collapse(config, dataset, n_sides, out_dir, window_count=100, quantile=0.999,
             dataset_spec=""):
    """Per-N trajectories of the mean top-quantile fractional cascade size.

    Training time is expressed as i / i_max so trajectories of different N
    share one axis.  Returns ``{N: (fraction, values)}``.
    """
    out_dir = Path(out_dir)
    out = {}
    rows = []
    for n_side in n_sides:
        cfg = replace(config, n_side=n_side)
        trained, _ = run_single(cfg, dataset, out_dir / f"n{n_side}", command="collapse",
                                dataset_spec=dataset_spec, write_log=False)
        centers, values = cascade_quantile_trajectory(trained.log, window_count, quantile)
        frac = centers / max(len(trained.log), 1)
        trajectory_to_csv(out_dir / f"n{n_side}" / "trajectory.csv", centers, values)
        n = n_side * n_side
        out[n] = (frac, values)
        rows.extend([n, k, f, v] for k, (f, v) in enumerate(zip(frac.tolist(), values.tolist())))
    header = ["N", "window", "training_fraction", "mean_top_fractional_cascade"]
    write_rows(out_dir / "collapse.csv", header, rows)
    return out


def pairwise_collapse_gap(trajectories: dict) -> float:
    """Largest pointwise mean absolute difference over all pairs of trajectories."""
    keys = sorted(trajectories)
    worst = 0.0
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            va, vb = trajectories[keys[a]][1], trajectories[keys[b]][1]
            m = min(len(va), len(vb))
            worst = max(worst, float(np.mean(np.abs(va[:m] - vb[:m]))))
    return worst


# -- classification -----------------------------------------------------------------

def classify(config, train_set, test_set, out_dir, average="macro", dataset_spec="",
             weights_format="bin"):
    out_dir = Path(out_dir)
    trained, rep = run_single(config, train_set, out_dir, command="classify",
                              dataset_spec=dataset_spec, weights_format=weights_format)
    labeled = label_units(trained, train_set)
    result = evaluate(labeled, test_set, average)
    payload = result.to_dict()
    payload["quality"] = rep.to_dict()
    write_json(out_dir / "classification.json", payload)
    result.confusion_to_csv(out_dir / "confusion.csv")
    write_rows(out_dir / "unit_labels.csv", ["unit", "label"],
               enumerate(labeled.unit_labels.tolist()))
    return trained, result


def split_for_classification(raw: Dataset, raw_test: Dataset | None = None,
                             n_train: int | None = None, seed: int = 0):
    """Return normalized ``(train, test)`` from unnormalized data.

    The test set is scaled with the training set's ranges (clipped), so no
    test statistics leak into training.
    """
    if raw_test is None:
        if n_train is None:
            raise InvalidArgument("need a test dataset or a training-set size to split")
        raw, raw_test = train_test_split(raw, n_train, seed=seed, stratify=True)
    train_set = normalize(raw)
    return train_set, apply_normalization(raw_test, train_set)


def evaluate_saved(map_dir, dataset: Dataset, window=1000):
    trained = TrainedMap.load(map_dir)
    return quality_report(trained.state, trained.topology, dataset, None, window)
