"""Asynchronously trained distributed topographic feature maps."""

from ._backend import BACKEND
from .cascade import CascadeRecord, MapState
from .dataset import Dataset, load_csv, load_idx, normalize, synthetic_square
from .engine import TrainConfig, TrainedMap, init_weights, train, train_sequential
from .metrics import EventLog, QualityReport, quality_report
from .schedules import Schedules
from .topology import Topology, build_lattice, make_topology, sample_far_links

__version__ = "0.1.0"
