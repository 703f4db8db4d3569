"""Training orchestration: configuration, initialization, the sequential engine,
and serialization of trained maps."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from ._backend import get_kernels
from .cascade import MapState
from .dataset import Dataset, epoch_order
from .errors import InvalidArgument
from .metrics import EventLog
from .schedules import Schedules, schedule_arrays
from .topology import Topology, make_topology

log = logging.getLogger(__name__)

SAMPLES_PER_UNIT = 600
EXPLORATION_PER_UNIT = 3


@dataclass
class TrainConfig:
    n_side: int = 30
    phi: int = 20
    e: int | None = None  # None -> 3N
    l_s: float = 0.05
    c_o: float = 0.5
    c_s: float = 0.5
    c_m: float = 0.1
    c_d: float = 100.0
    theta: int = 4
    i_max: int | None = None  # None -> 600N
    engine: str = "sequential"
    drive: str = "quiescent"
    seed_topology: int = 0
    seed_weights: int = 1
    seed_training: int = 2
    audit_bmu: bool = False
    audit_window: int | None = None  # audit only the last k samples
    repulsive_cascade: bool = False
    include_far_in_greedy: bool = False
    max_firings: int | None = None  # None -> 50N
    backend: str | None = None
    workers: int = 1
    watchdog_seconds: float = 30.0

    @property
    def n_units(self) -> int:
        return self.n_side * self.n_side

    @property
    def resolved_e(self) -> int:
        return EXPLORATION_PER_UNIT * self.n_units if self.e is None else int(self.e)

    @property
    def resolved_i_max(self) -> int:
        return SAMPLES_PER_UNIT * self.n_units if self.i_max is None else int(self.i_max)

    @property
    def resolved_max_firings(self) -> int:
        return 50 * self.n_units if self.max_firings is None else int(self.max_firings)

    def schedules(self) -> Schedules:
        return Schedules(
            l_s=self.l_s, c_o=self.c_o, c_s=self.c_s, c_m=self.c_m, c_d=self.c_d,
            i_max=max(self.resolved_i_max, 1), n_units=self.n_units,
        )

    def with_seed(self, seed: int) -> "TrainConfig":
        """Derive the three seeds from one base seed."""
        return replace(self, seed_topology=seed, seed_weights=seed + 1,
                       seed_training=seed + 2)

    def validate(self) -> "TrainConfig":
        if self.n_side < 2:
            raise InvalidArgument(f"n_side must be >= 2, got {self.n_side}")
        if self.phi < 1:
            raise InvalidArgument(f"phi must be positive, got {self.phi}")
        if self.resolved_e < 0:
            raise InvalidArgument("e must be non-negative")
        if self.theta < 1:
            raise InvalidArgument("theta must be positive")
        if self.resolved_i_max < 0:
            raise InvalidArgument("i_max must be non-negative")
        if self.engine not in ("sequential", "async"):
            raise InvalidArgument(f"unknown engine {self.engine!r}")
        if self.drive not in ("quiescent", "overlapped"):
            raise InvalidArgument(f"unknown drive policy {self.drive!r}")
        if self.audit_window is not None and self.audit_window < 0:
            raise InvalidArgument("audit_window must be non-negative")
        self.schedules().validate()
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    def resolved(self) -> dict:
        out = self.to_dict()
        out.update(N=self.n_units, e=self.resolved_e, i_max=self.resolved_i_max,
                   max_firings=self.resolved_max_firings)
        return out

    @property
    def audit_from(self) -> int:
        if not self.audit_bmu:
            return self.resolved_i_max
        if self.audit_window is None:
            return 0
        return max(0, self.resolved_i_max - self.audit_window)


@dataclass
class TrainedMap:
    topology: Topology
    state: MapState
    config: TrainConfig
    log: EventLog | None = None

    @property
    def weights(self) -> np.ndarray:
        return self.state.weights

    def save(self, directory, weights_format: str = "bin") -> Path:
        """Write ``map.json`` plus the weight matrix (little-endian f8 or CSV)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if weights_format == "bin":
            wfile = "weights.bin"
            self.state.weights.astype("<f8").tofile(directory / wfile)
        elif weights_format == "csv":
            wfile = "weights.csv"
            np.savetxt(directory / wfile, self.state.weights, delimiter=",", fmt="%.17g")
        else:
            raise InvalidArgument(f"unknown weights format {weights_format!r}")
        header = {
            "config": self.config.to_dict(),
            "seeds": {
                "topology": self.config.seed_topology,
                "weights": self.config.seed_weights,
                "training": self.config.seed_training,
            },
            "n_side": self.topology.n_side,
            "d": self.state.d,
            "theta": self.state.theta,
            "weights_file": wfile,
            "weights_format": weights_format,
            "dtype": "<f8",
            "counters": self.state.counters.tolist(),
            "topology": self.topology.to_dict(),
        }
        with open(directory / "map.json", "w") as fh:
            json.dump(header, fh)
        return directory / "map.json"

    @classmethod
    def load(cls, directory) -> "TrainedMap":
        directory = Path(directory)
        with open(directory / "map.json") as fh:
            header = json.load(fh)
        n = header["n_side"] ** 2
        d = header["d"]
        wpath = directory / header["weights_file"]
        if header["weights_format"] == "bin":
            weights = np.fromfile(wpath, dtype="<f8")
        else:
            weights = np.loadtxt(wpath, delimiter=",", dtype=np.float64, ndmin=2)
        weights = weights.reshape(n, d).astype(np.float64)
        state = MapState(weights, np.array(header["counters"], np.int64), header["theta"])
        topo = Topology.from_dict(header["topology"])
        return cls(topo, state, TrainConfig.from_dict(header["config"]))


def init_weights(topology: Topology, dataset: Dataset | int, rng, theta: int = 4) -> MapState:
    """Uniform random weights in [0, 1]^d, counters at zero."""
    d = dataset if isinstance(dataset, int) else dataset.d
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    weights = rng.random((topology.n_units, d))
    return MapState(weights, np.zeros(topology.n_units, np.int64), theta)


def _check_data(dataset: Dataset) -> None:
    if len(dataset) == 0:
        raise InvalidArgument("empty dataset")
    x = dataset.samples
    if x.min() < 0.0 or x.max() > 1.0:
        raise InvalidArgument("dataset must be normalized to [0, 1]; call normalize() first")


def training_rngs(seed_training: int):
    """Independent generators for the sample order and the training dynamics."""
    order_ss, dyn_ss = np.random.SeedSequence(seed_training).spawn(2)
    return np.random.default_rng(order_ss), np.random.default_rng(dyn_ss)


def prepare(config: TrainConfig, dataset: Dataset, topology: Topology | None = None):
    config.validate()
    _check_data(dataset)
    if topology is None:
        topology = make_topology(config.n_side, config.phi, config.seed_topology)
    elif topology.n_side != config.n_side:
        raise InvalidArgument("topology size does not match config")
    state = init_weights(topology, dataset, config.seed_weights, config.theta)
    return topology, state


def train_sequential(config: TrainConfig, dataset: Dataset, *,
                     topology: Topology | None = None, progress=None,
                     chunk: int = 50_000) -> TrainedMap:
    """Single-threaded training; fully determined by the three seeds.

    ``progress(done, total)`` is called after every ``chunk`` samples.
    """
    topology, state = prepare(config, dataset, topology)
    n = topology.n_units
    i_max = config.resolved_i_max
    order_rng, dyn_rng = training_rngs(config.seed_training)
    order = epoch_order(len(dataset), i_max, order_rng)
    ev = EventLog.empty(n, i_max)
    ev.sample_idx[:] = order
    if i_max == 0:
        return TrainedMap(topology, state, config, ev)
    l_c, p = schedule_arrays(config.schedules(), i_max)
    ev.l_c_i[:] = l_c
    ev.p_i[:] = p
    kern = get_kernels(config.backend)
    far = topology.far
    audit_from = config.audit_from
    e = config.resolved_e
    for start in range(0, i_max, chunk):
        stop = min(start + chunk, i_max)
        kern.train(
            state.weights, state.counters, topology.near, topology.degree, far,
            dataset.samples, order[start:stop], l_c[start:stop], p[start:stop],
            e, config.theta, config.l_s, config.include_far_in_greedy,
            config.repulsive_cascade, config.resolved_max_firings,
            max(audit_from - start, 0), dyn_rng,
            ev.gmu[start:stop], ev.bmu[start:stop], ev.q_gmu[start:stop],
            ev.cascade_firings[start:stop], ev.cascade_weight_updates[start:stop],
        )
        if progress is not None:
            progress(stop, i_max)
        log.debug("trained %d/%d samples", stop, i_max)
    return TrainedMap(topology, state, config, ev)


def train(config: TrainConfig, dataset: Dataset, **kwargs) -> TrainedMap:
    """Dispatch to the sequential or asynchronous engine per ``config.engine``."""
    if config.engine == "async":
        from .actors import train_async

        return train_async(config, dataset, **kwargs)
    return train_sequential(config, dataset, **kwargs)
