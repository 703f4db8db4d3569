"""Grain counters, firing, and broadcast-driven neighbor adaptation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import get_kernels
from .errors import InvalidArgument


@dataclass
class MapState:
    weights: np.ndarray  # (N, d) float64
    counters: np.ndarray  # (N,) int64
    theta: int = 4

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.counters = np.ascontiguousarray(self.counters, dtype=np.int64)
        if self.theta < 1:
            raise InvalidArgument(f"theta must be positive, got {self.theta}")

    @property
    def n_units(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "MapState":
        return MapState(self.weights.copy(), self.counters.copy(), self.theta)

    @classmethod
    def from_weights(cls, weights, theta: int = 4) -> "MapState":
        weights = np.asarray(weights, dtype=np.float64)
        return cls(weights, np.zeros(weights.shape[0], dtype=np.int64), theta)


@dataclass
class CascadeRecord:
    origin: int
    firings: int
    weight_updates: int
    grains_dissipated: int
    n_units: int

    @property
    def fractional_size(self) -> float:
        return self.firings / self.n_units


def _check_dim(state: MapState, vec) -> np.ndarray:
    vec = np.ascontiguousarray(vec, dtype=np.float64)
    if vec.shape != (state.d,):
        raise InvalidArgument(f"vector of shape {vec.shape} for a map of dimension {state.d}")
    return vec


def adapt_to_sample(state: MapState, unit: int, sample, l_s: float) -> MapState:
    sample = _check_dim(state, sample)
    w = state.weights[unit]
    w += l_s * (sample - w)
    return state


def adapt_to_broadcast(state: MapState, unit: int, sender_weight, l_c: float,
                       repulsive: bool = False) -> MapState:
    """Move ``unit`` toward the sender's weight (away from it if ``repulsive``)."""
    sender_weight = _check_dim(state, sender_weight)
    w = state.weights[unit]
    if repulsive:
        w += l_c * (w - sender_weight)
    else:
        w += l_c * (sender_weight - w)
    return state


def maybe_add_grain(state: MapState, unit: int, p: float, rng) -> bool:
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument(f"p must lie in [0, 1], got {p}")
    if rng.random() < p:
        state.counters[unit] += 1
        return True
    return False


def run_cascade(state: MapState, topology, origin: int, l_c: float, p: float,
                rng, *, repulsive: bool = False, discipline: str = "fifo",
                max_firings: int | None = None, backend: str | None = None) -> CascadeRecord:
    """Fire every unit that reaches the threshold until the map is quiescent.

    A firing unit loses ``theta`` grains and broadcasts its weight to each
    near neighbor; each receiver adapts with rate ``l_c`` and gains a grain
    with probability ``p``.  Pending firings are processed in ``discipline``
    order ("fifo" or "lifo").  ``l_c`` and ``p`` are held fixed for the whole
    cascade.
    """
    if discipline not in ("fifo", "lifo"):
        raise InvalidArgument(f"unknown discipline {discipline!r}")
    n = state.n_units
    if max_firings is None:
        max_firings = 50 * n
    kern = get_kernels(backend)
    f, u, dis = kern.cascade(
        state.weights, state.counters, topology.near, topology.degree, int(origin),
        int(state.theta), float(l_c), float(p), bool(repulsive),
        discipline == "lifo", int(max_firings), rng,
    )
    return CascadeRecord(int(origin), int(f), int(u), int(dis), n)
