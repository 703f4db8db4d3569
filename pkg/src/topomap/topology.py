"""Unit lattice, near links, and distance-weighted far links."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument


def coords(unit: int, n_side: int) -> tuple[int, int]:
    """Row-major id -> (x, y) grid coordinates."""
    return unit % n_side, unit // n_side


def manhattan_distance(a: int, b: int, n_side: int) -> int:
    ax, ay = coords(a, n_side)
    bx, by = coords(b, n_side)
    return abs(ax - bx) + abs(ay - by)


def distances_from(unit: int, n_side: int) -> np.ndarray:
    """Manhattan distance from ``unit`` to every unit, indexed by unit id."""
    ids = np.arange(n_side * n_side)
    x, y = coords(unit, n_side)
    return np.abs(ids % n_side - x) + np.abs(ids // n_side - y)


@dataclass
class Topology:
    """Square, non-toroidal lattice of ``n_side**2`` units.

    ``near`` is an ``(N, 4)`` int32 table padded with -1 (neighbors sorted
    ascending), ``degree`` holds the true near-degree of each unit, and
    ``far`` is an ``(N, phi)`` int32 table of directed long-range links.
    """

    n_side: int
    near: np.ndarray
    degree: np.ndarray
    far: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), np.int32))
    phi: int = 0
    seed: int | None = None

    @property
    def n_units(self) -> int:
        return self.n_side * self.n_side

    def near_of(self, unit: int) -> list[int]:
        return self.near[unit, : self.degree[unit]].tolist()

    def far_of(self, unit: int) -> list[int]:
        return self.far[unit].tolist() if self.phi else []

    def is_adjacent(self, a: int, b: int) -> bool:
        return manhattan_distance(a, b, self.n_side) == 1

    def to_dict(self) -> dict:
        return {
            "n_side": self.n_side,
            "phi": self.phi,
            "seed": self.seed,
            "far": self.far.tolist() if self.phi else [],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Topology":
        topo = build_lattice(int(payload["n_side"]))
        phi = int(payload.get("phi", 0))
        if phi:
            far = np.ascontiguousarray(payload["far"], dtype=np.int32)
            if far.shape != (topo.n_units, phi):
                raise InvalidArgument(
                    f"far table has shape {far.shape}, expected {(topo.n_units, phi)}"
                )
            topo.far = far
            topo.phi = phi
        topo.seed = payload.get("seed")
        return topo

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Topology":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_lattice(n_side: int) -> Topology:
    if n_side < 2:
        raise InvalidArgument(f"n_side must be >= 2, got {n_side}")
    n = n_side * n_side
    near = np.full((n, 4), -1, dtype=np.int32)
    degree = np.zeros(n, dtype=np.int32)
    for j in range(n):
        x, y = coords(j, n_side)
        # ascending id order: up, left, right, down
        cand = []
        if y > 0:
            cand.append(j - n_side)
        if x > 0:
            cand.append(j - 1)
        if x < n_side - 1:
            cand.append(j + 1)
        if y < n_side - 1:
            cand.append(j + n_side)
        near[j, : len(cand)] = cand
        degree[j] = len(cand)
    return Topology(n_side=n_side, near=near, degree=degree)


def far_link_weights(unit: int, n_side: int) -> np.ndarray:
    """Unnormalized selection weights ``1/D`` over all units (0 where D < 2)."""
    dist = distances_from(unit, n_side).astype(float)
    w = np.zeros_like(dist)
    mask = dist >= 2
    w[mask] = 1.0 / dist[mask]
    return w


def draw_far_links(unit: int, n_side: int, phi: int, rng) -> np.ndarray:
    """Draw ``phi`` distinct targets, renormalizing the weights after each draw."""
    w = far_link_weights(unit, n_side)
    if phi > np.count_nonzero(w):
        raise InvalidArgument(
            f"phi={phi} exceeds the {np.count_nonzero(w)} candidates of unit {unit}"
        )
    out = np.empty(phi, dtype=np.int32)
    for t in range(phi):
        cdf = np.cumsum(w)
        k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        k = min(k, len(w) - 1)
        out[t] = k
        w[k] = 0.0
    return out


def sample_far_links(topology: Topology, phi: int, rng) -> Topology:
    """Attach ``phi`` directed far links per unit, drawn with probability ~ 1/D.

    ``rng`` is a ``numpy.random.Generator`` or an integer seed (recorded on the
    topology for serialization).
    """
    if phi < 1:
        raise InvalidArgument(f"phi must be positive, got {phi}")
    n = topology.n_units
    max_phi = min(n - 1 - int(d) for d in topology.degree)
    if phi > max_phi:
        raise InvalidArgument(f"phi={phi} too large for N={n} (max {max_phi})")
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    far = np.empty((n, phi), dtype=np.int32)
    for j in range(n):
        far[j] = draw_far_links(j, topology.n_side, phi, rng)
    return Topology(
        n_side=topology.n_side,
        near=topology.near,
        degree=topology.degree,
        far=far,
        phi=phi,
        seed=seed,
    )


def make_topology(n_side: int, phi: int, seed: int) -> Topology:
    return sample_far_links(build_lattice(n_side), phi, seed)
