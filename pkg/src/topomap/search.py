"""Distributed heuristic search for a good-matching unit, plus the exact BMU."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import get_kernels
from .errors import InvalidArgument


@dataclass(frozen=True)
class SearchResult:
    gmu: int
    hops: int
    greedy_steps: int
    distance: float


def _as_sample(state, sample) -> np.ndarray:
    sample = np.ascontiguousarray(sample, dtype=np.float64)
    if sample.shape != (state.d,):
        raise InvalidArgument(
            f"sample of shape {sample.shape} for a map of dimension {state.d}"
        )
    return sample


def heuristic_search(state, topology, sample, e: int, rng, *,
                     include_far: bool = False, backend: str | None = None) -> SearchResult:
    """Random far-link exploration for ``e`` hops, then greedy descent over near links.

    The start unit is drawn uniformly.  Exploration moves the holder even
    when it gets worse; only the best-so-far unit is tracked.  The greedy
    phase moves to the best near neighbor (lowest id on ties) while that
    strictly improves the distance.
    """
    sample = _as_sample(state, sample)
    if state.n_units != topology.n_units:
        raise InvalidArgument("map and topology sizes differ")
    if e < 0:
        raise InvalidArgument("e must be non-negative")
    kern = get_kernels(backend)
    g, hops, steps, q = kern.search(
        state.weights, topology.near, topology.degree, _far_table(topology),
        sample, int(e), bool(include_far), rng,
    )
    return SearchResult(int(g), int(hops), int(steps), math.sqrt(q))


def _far_table(topology) -> np.ndarray:
    if topology.phi:
        return topology.far
    return np.zeros((topology.n_units, 0), dtype=np.int32)


def exact_bmu(state, sample) -> int:
    """Linear-scan argmin of the Euclidean distance; ties go to the lowest id."""
    sample = _as_sample(state, sample)
    return int(get_kernels().exact_bmu(state.weights, sample)[0])


def is_search_failure(result: SearchResult, state, sample) -> bool:
    """True iff the GMU does not attain the optimal distance.

    A GMU with a different id but exactly the BMU's distance is a success.
    """
    sample = _as_sample(state, sample)
    kern = get_kernels()
    bmu, best_q = kern.exact_bmu(state.weights, sample)
    if result.gmu == bmu:
        return False
    return kern.sqdist(state.weights[result.gmu], sample) > best_q
