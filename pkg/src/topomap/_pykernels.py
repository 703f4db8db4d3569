"""Pure-Python implementation of the hot training kernels.

Used when the compiled ``_ckernels`` extension is unavailable (or when
``TOPOMAP_PURE=1``).  Both implementations consume the random stream in the
same order, one ``Generator.random()`` double per decision, so for
low-dimensional data (d <= ``EXACT_DIM``) they produce bit-identical maps.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

NAME = "python"

# Above this dimensionality distances are summed by numpy instead of a
# sequential loop; results then agree with the C kernel only to rounding.
EXACT_DIM = 32


class CascadeOverflow(RuntimeError):
    """A cascade exceeded the hard firing cap."""


def sqdist(w, s) -> float:
    if w.shape[0] <= EXACT_DIM:
        acc = 0.0
        for a, b in zip(w.tolist(), s.tolist()):
            t = a - b
            acc += t * t
        return acc
    diff = w - s
    return float(np.dot(diff, diff))


def _pick(rng, n: int) -> int:
    k = int(rng.random() * n)
    return k if k < n else n - 1


def exact_bmu(weights, sample):
    best = 0
    best_q = sqdist(weights[0], sample)
    for j in range(1, weights.shape[0]):
        q = sqdist(weights[j], sample)
        if q < best_q:
            best, best_q = j, q
    return best, best_q


def search(weights, near, degree, far, sample, e, include_far, rng):
    n_units = weights.shape[0]
    phi = far.shape[1]
    if e > 0 and phi == 0:
        raise ValueError("exploration requires far links")
    start = _pick(rng, n_units)
    best = start
    best_q = sqdist(weights[start], sample)
    holder = start
    for _ in range(e):
        holder = int(far[holder, _pick(rng, phi)])
        q = sqdist(weights[holder], sample)
        if q < best_q:
            best, best_q = holder, q

    steps = 0
    while True:
        cand = -1
        cand_q = math.inf
        for t in range(degree[best]):
            k = int(near[best, t])
            q = sqdist(weights[k], sample)
            if q < cand_q or (q == cand_q and k < cand):
                cand, cand_q = k, q
        if include_far:
            for t in range(phi):
                k = int(far[best, t])
                q = sqdist(weights[k], sample)
                if q < cand_q or (q == cand_q and k < cand):
                    cand, cand_q = k, q
        if cand >= 0 and cand_q < best_q:
            best, best_q = cand, cand_q
            steps += 1
        else:
            break
    return best, e, steps, best_q


def cascade(weights, counters, near, degree, origin, theta, l_c, p,
            repulsive, lifo, max_firings, rng):
    """Topple until every counter is below ``theta``.

    Returns ``(firings, weight_updates, grains_dissipated)``.
    """
    firings = updates = dissipated = 0
    if counters[origin] < theta:
        return 0, 0, 0
    pending = deque([origin])
    while pending:
        u = pending.pop() if lifo else pending.popleft()
        if counters[u] < theta:
            continue
        counters[u] -= theta
        if counters[u] >= theta:
            pending.append(u)
        firings += 1
        if firings > max_firings:
            raise CascadeOverflow(
                f"cascade from unit {origin} exceeded {max_firings} firings"
            )
        sender = weights[u].copy()
        deg = int(degree[u])
        for t in range(deg):
            v = int(near[u, t])
            w = weights[v]
            if repulsive:
                w += l_c * (w - sender)
            else:
                w += l_c * (sender - w)
            updates += 1
            if rng.random() < p:
                counters[v] += 1
                if counters[v] == theta:
                    pending.append(v)
            else:
                dissipated += 1
        dissipated += theta - deg if theta > deg else 0
    return firings, updates, dissipated


def train(weights, counters, near, degree, far, data, order, lc_arr, p_arr,
          e, theta, l_s, include_far, repulsive, max_firings, audit_from, rng,
          out_gmu, out_bmu, out_q, out_firings, out_updates):
    for t in range(order.shape[0]):
        s = data[order[t]]
        if t >= audit_from:
            out_bmu[t], bq = exact_bmu(weights, s)
        g, _, _, q = search(weights, near, degree, far, s, e, include_far, rng)
        out_gmu[t] = g
        if t >= audit_from and q == bq:
            out_bmu[t] = g
        out_q[t] = math.sqrt(q)
        w = weights[g]
        w += l_s * (s - w)
        if rng.random() < p_arr[t]:
            counters[g] += 1
        if counters[g] >= theta:
            f, u, _ = cascade(weights, counters, near, degree, g, theta,
                              lc_arr[t], p_arr[t], repulsive, False,
                              max_firings, rng)
            out_firings[t] = f
            out_updates[t] = u
    return order.shape[0]
