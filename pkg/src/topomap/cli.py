"""Command-line interface.

    topomap train    --data synthetic:square:2000 --n-side 10 --out runs/a
    topomap eval     --map runs/a/map --data synthetic:square:2000
    topomap classify --data data/satimage.csv --n-train 4435 --n-side 34 --c-d 1000
    topomap sweep-e | sweep-cascade | sweep-n | collapse ...

Settings come from TrainConfig defaults, then an optional YAML ``--config``
file, then command-line flags (flags win).  Outputs go to ``--out``, else
``$TOPOMAP_OUTPUT_DIR``, else ``./topomap-out``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import yaml

from . import experiments as ex
from .engine import TrainConfig
from .errors import CascadeOverflow, DeadlockError, InvalidArgument, ParseError, UnitAutonomyViolation

EXIT_CONFIG, EXIT_IO, EXIT_RUNTIME = 1, 2, 3
OUTPUT_ENV = "TOPOMAP_OUTPUT_DIR"

log = logging.getLogger("topomap")


class ConfigError(Exception):
    pass


# TrainConfig fields settable by flag: name -> (type, help)
_CONFIG_FLAGS = {
    "n_side": (int, "lattice side length; N = n_side^2"),
    "phi": (int, "far links per unit"),
    "e": (int, "exploration hops per search (default 3N)"),
    "l_s": (float, "sample learning rate"),
    "c_o": (float, "cascade learning-rate offset"),
    "c_s": (float, "cascade learning-rate slope"),
    "c_m": (float, "cascade grain magnitude"),
    "c_d": (float, "cascade grain decay"),
    "theta": (int, "firing threshold"),
    "i_max": (int, "number of training samples (default 600N)"),
    "max_firings": (int, "per-sample firing cap (default 50N)"),
    "workers": (int, "async engine worker threads (1 = seeded inline scheduler)"),
    "watchdog_seconds": (float, "async deadlock watchdog"),
    "audit_window": (int, "audit only the last k samples"),
}
_BOOL_FLAGS = ("audit_bmu", "repulsive_cascade", "include_far_in_greedy")


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file of settings")
    common.add_argument("--data", help="dataset spec (synthetic:square:N[:D], csv:PATH[:COL], idx:IMG[:LBL])")
    common.add_argument("--out", type=Path, help=f"output directory (env {OUTPUT_ENV})")
    common.add_argument("--seed", type=int, help="base seed; topology/weights/training use seed, +1, +2")
    common.add_argument("--engine", choices=("sequential", "async"))
    common.add_argument("--drive", choices=("quiescent", "overlapped"))
    common.add_argument("--backend", choices=("cython", "python"))
    common.add_argument("--weights-format", choices=("bin", "csv"))
    common.add_argument("--repeats", type=int, help="repeats per grid point (sweeps)")
    common.add_argument("-v", "--verbose", action="store_true")
    for name, (typ, help_) in _CONFIG_FLAGS.items():
        common.add_argument("--" + name.replace("_", "-"), type=typ, help=help_)
    for name in _BOOL_FLAGS:
        common.add_argument("--" + name.replace("_", "-"), action="store_true", default=None)

    ap = argparse.ArgumentParser(prog="topomap", description="Distributed topographic map training")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train one map")
    p = sub.add_parser("eval", parents=[common], help="Q and T of a saved map on a dataset")
    p.add_argument("--map", type=Path, help="directory holding map.json")
    p = sub.add_parser("classify", parents=[common], help="train, label units, score a test set")
    p.add_argument("--test-data", help="test dataset spec (else split --data)")
    p.add_argument("--n-train", type=int, help="training-set size when splitting --data")
    p.add_argument("--average", choices=("macro", "micro"))
    p = sub.add_parser("sweep-e", parents=[common], help="F and T against e/N")
    p.add_argument("--e-factors", type=_floats, help="comma-separated multiples of N")
    p.add_argument("--window", type=int, help="audit window for F")
    p = sub.add_parser("sweep-cascade", parents=[common], help="Q and T over a c_m x c_d grid")
    p.add_argument("--c-m-values", type=_floats)
    p.add_argument("--c-d-values", type=_floats)
    p = sub.add_parser("sweep-n", parents=[common], help="Q, T and F against map size")
    p.add_argument("--n-sides", type=_ints)
    p.add_argument("--window", type=int)
    p = sub.add_parser("collapse", parents=[common], help="cascade-size trajectories per N")
    p.add_argument("--n-sides", type=_ints)
    p.add_argument("--window-count", type=int)
    p.add_argument("--quantile", type=float)
    return ap


DEFAULTS = {
    "data": "synthetic:square:2000",
    "seed": 0,
    "repeats": 1,
    "weights_format": "bin",
    "average": "macro",
    "e_factors": [0.1, 1.0, 3.0],
    "window": 1000,
    "c_m_values": [0.05, 0.1],
    "c_d_values": [100.0, 1000.0],
    "n_sides": [10, 20, 30],
    "window_count": 100,
    "quantile": 0.999,
}


def load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            payload = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected a mapping of settings")
    if isinstance(payload.get("config"), dict) and "command" in payload:
        # a run manifest: replay its resolved config and dataset
        flat = {k: v for k, v in payload["config"].items() if k != "N"}
        if payload.get("dataset"):
            flat["data"] = payload["dataset"]
        payload = flat
    return {k.replace("-", "_"): v for k, v in payload.items()}


def resolve_settings(args) -> tuple[TrainConfig, dict]:
    """Merge defaults, config file and flags; return (TrainConfig, other settings)."""
    settings = dict(DEFAULTS)
    settings.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        settings[key] = value
    cfg_names = {f.name for f in fields(TrainConfig)}
    cfg_kwargs = {k: settings.pop(k) for k in list(settings) if k in cfg_names}
    known_other = set(DEFAULTS) | {"out", "verbose", "map", "test_data", "n_train"}
    unknown = set(settings) - known_other
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    try:
        config = TrainConfig(**cfg_kwargs).with_seed(int(settings["seed"]))
        if args.command in ("train", "classify", "eval"):
            config.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    # explicit seeds in the file win over the derived ones
    explicit = {k: cfg_kwargs[k] for k in ("seed_topology", "seed_weights", "seed_training")
                if k in cfg_kwargs}
    config = replace(config, **explicit)
    return config, settings


def output_dir(settings) -> Path:
    if settings.get("out") is not None:
        return Path(settings["out"])
    return Path(os.environ.get(OUTPUT_ENV, "topomap-out"))


def _dump(path: Path, header, rows) -> None:
    print(f"wrote {path}")
    print(",".join(header))
    for row in rows:
        print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))


def run(args) -> int:
    config, s = resolve_settings(args)
    out = output_dir(s)
    spec = s["data"]
    cmd = args.command
    if cmd == "train":
        ds = ex.load_dataset(spec, seed=config.seed_weights)
        _, report = ex.run_single(config, ds, out, dataset_spec=spec,
                                  weights_format=s["weights_format"])
        print(json.dumps(report.to_dict()))
    elif cmd == "eval":
        if s.get("map") is None:
            raise ConfigError("eval needs --map")
        ds = ex.load_dataset(spec, seed=config.seed_weights)
        out.mkdir(parents=True, exist_ok=True)
        report = ex.evaluate_saved(s["map"], ds)
        payload = report.to_dict()
        ex.write_json(out / "report.json", payload)
        ex.write_json(out / "manifest.json",
                      ex.manifest(config, "eval", spec, {"map": str(s["map"])}))
        print(json.dumps(payload))
    elif cmd == "classify":
        raw = ex.load_dataset(spec, seed=config.seed_weights, normalize_data=False)
        raw_test = None
        if s.get("test_data"):
            raw_test = ex.load_dataset(s["test_data"], normalize_data=False)
        train_set, test_set = ex.split_for_classification(raw, raw_test, s.get("n_train"),
                                                          seed=int(s["seed"]))
        _, result = ex.classify(config, train_set, test_set, out, average=s["average"],
                                dataset_spec=spec, weights_format=s["weights_format"])
        print(json.dumps({"precision": result.precision, "recall": result.recall}))
    else:
        ds = ex.load_dataset(spec, seed=int(s["seed"]))
        common = dict(repeats=int(s["repeats"]), base_seed=int(s["seed"]), dataset_spec=spec)
        if cmd == "sweep-e":
            header, rows = ex.sweep_e(config, ds, s["e_factors"], out, window=int(s["window"]),
                                      **common)
            _dump(out / "sweep_e.csv", header, rows)
        elif cmd == "sweep-cascade":
            header, rows = ex.sweep_cascade(config, ds, s["c_m_values"], s["c_d_values"], out,
                                            **common)
            _dump(out / "sweep_cascade.csv", header, rows)
        elif cmd == "sweep-n":
            header, rows = ex.sweep_n(config, ds, s["n_sides"], out, window=int(s["window"]),
                                      **common)
            _dump(out / "sweep_n.csv", header, rows)
        elif cmd == "collapse":
            traj = ex.collapse(config, ds, s["n_sides"], out, int(s["window_count"]),
                               float(s["quantile"]), dataset_spec=spec)
            print(f"wrote {out / 'collapse.csv'}")
            print(f"max pairwise mean |difference|: {ex.pairwise_collapse_gap(traj):.4f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"topomap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError) as exc:
        print(f"topomap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DeadlockError, UnitAutonomyViolation, *CascadeOverflow) as exc:
        print(f"topomap: aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
