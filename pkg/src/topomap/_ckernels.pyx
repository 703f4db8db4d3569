# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels.

Mirrors ``_pykernels`` decision for decision: one ``next_double`` draw from
the generator's bit generator per random choice, same visiting order, same
floating-point operation order.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t

import numpy as np

NAME = "cython"


class CascadeOverflow(RuntimeError):
    """A cascade exceeded the hard firing cap."""


cdef bitgen_t* _bitgen(rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline Py_ssize_t _pick(bitgen_t* bg, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k = <Py_ssize_t>(bg.next_double(bg.state) * n)
    return k if k < n else n - 1


cdef inline double _sqdist(const double[:, ::1] w, Py_ssize_t j,
                           const double[::1] s) noexcept nogil:
    cdef double acc = 0.0, t
    cdef Py_ssize_t k
    for k in range(s.shape[0]):
        t = w[j, k] - s[k]
        acc += t * t
    return acc


cdef Py_ssize_t _exact_bmu(const double[:, ::1] w, const double[::1] s,
                           double* out_q) noexcept nogil:
    cdef Py_ssize_t j, best = 0
    cdef double q, best_q = _sqdist(w, 0, s)
    for j in range(1, w.shape[0]):
        q = _sqdist(w, j, s)
        if q < best_q:
            best = j
            best_q = q
    out_q[0] = best_q
    return best


cdef Py_ssize_t _search(const double[:, ::1] w, const int[:, ::1] near,
                        const int[::1] degree, const int[:, ::1] far,
                        const double[::1] s, Py_ssize_t e, bint include_far,
                        bitgen_t* bg, double* out_q, Py_ssize_t* out_steps) noexcept nogil:
    cdef Py_ssize_t n = w.shape[0], phi = far.shape[1]
    cdef Py_ssize_t best, holder, it, t, k, cand, steps = 0
    cdef double q, best_q, cand_q

    best = _pick(bg, n)
    best_q = _sqdist(w, best, s)
    holder = best
    for it in range(e):
        holder = far[holder, _pick(bg, phi)]
        q = _sqdist(w, holder, s)
        if q < best_q:
            best = holder
            best_q = q

    while True:
        cand = -1
        cand_q = INFINITY
        for t in range(degree[best]):
            k = near[best, t]
            q = _sqdist(w, k, s)
            if q < cand_q or (q == cand_q and k < cand):
                cand = k
                cand_q = q
        if include_far:
            for t in range(phi):
                k = far[best, t]
                q = _sqdist(w, k, s)
                if q < cand_q or (q == cand_q and k < cand):
                    cand = k
                    cand_q = q
        if cand >= 0 and cand_q < best_q:
            best = cand
            best_q = cand_q
            steps += 1
        else:
            break
    out_q[0] = best_q
    out_steps[0] = steps
    return best


cdef int _cascade(double[:, ::1] w, long long[::1] counters,
                  const int[:, ::1] near, const int[::1] degree,
                  Py_ssize_t origin, long long theta, double l_c, double p,
                  bint repulsive, bint lifo, Py_ssize_t max_firings,
                  bitgen_t* bg, Py_ssize_t* out) noexcept nogil:
    """Returns 0 on success, 1 on firing-cap overflow, 2 on allocation failure.

    ``out`` receives (firings, updates, dissipated).  The pending ring holds
    each unit at most once, so capacity N suffices.
    """
    cdef Py_ssize_t n = w.shape[0], d = w.shape[1]
    cdef Py_ssize_t head = 0, size = 0, u, v, t, k, deg
    cdef Py_ssize_t firings = 0, updates = 0, dissipated = 0
    cdef Py_ssize_t* ring
    cdef double* sender
    cdef int status = 0

    out[0] = 0
    out[1] = 0
    out[2] = 0
    if counters[origin] < theta:
        return 0
    ring = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    sender = <double*> malloc(d * sizeof(double))
    if ring == NULL or sender == NULL:
        free(ring)
        free(sender)
        return 2
    ring[0] = origin
    size = 1
    while size > 0:
        if lifo:
            u = ring[(head + size - 1) % n]
        else:
            u = ring[head]
            head = (head + 1) % n
        size -= 1
        if counters[u] < theta:
            continue
        counters[u] -= theta
        if counters[u] >= theta:
            ring[(head + size) % n] = u
            size += 1
        firings += 1
        if firings > max_firings:
            status = 1
            break
        for k in range(d):
            sender[k] = w[u, k]
        deg = degree[u]
        for t in range(deg):
            v = near[u, t]
            if repulsive:
                for k in range(d):
                    w[v, k] += l_c * (w[v, k] - sender[k])
            else:
                for k in range(d):
                    w[v, k] += l_c * (sender[k] - w[v, k])
            updates += 1
            if bg.next_double(bg.state) < p:
                counters[v] += 1
                if counters[v] == theta:
                    ring[(head + size) % n] = v
                    size += 1
            else:
                dissipated += 1
        if theta > deg:
            dissipated += theta - deg
    free(ring)
    free(sender)
    out[0] = firings
    out[1] = updates
    out[2] = dissipated
    return status


def sqdist(const double[::1] w, const double[::1] s):
    cdef double acc = 0.0, t
    cdef Py_ssize_t k
    for k in range(s.shape[0]):
        t = w[k] - s[k]
        acc += t * t
    return acc


def exact_bmu(const double[:, ::1] weights, const double[::1] sample):
    cdef double q
    cdef Py_ssize_t j = _exact_bmu(weights, sample, &q)
    return j, q


def search(const double[:, ::1] weights, const int[:, ::1] near,
           const int[::1] degree, const int[:, ::1] far,
           const double[::1] sample, Py_ssize_t e, bint include_far, rng):
    if e > 0 and far.shape[1] == 0:
        raise ValueError("exploration requires far links")
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double q
    cdef Py_ssize_t steps, g
    with rng.bit_generator.lock, nogil:
        g = _search(weights, near, degree, far, sample, e, include_far, bg,
                    &q, &steps)
    return g, e, steps, q


def cascade(double[:, ::1] weights, long long[::1] counters,
            const int[:, ::1] near, const int[::1] degree, Py_ssize_t origin,
            long long theta, double l_c, double p, bint repulsive, bint lifo,
            Py_ssize_t max_firings, rng):
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t out[3]
    cdef int status
    with rng.bit_generator.lock, nogil:
        status = _cascade(weights, counters, near, degree, origin, theta, l_c,
                          p, repulsive, lifo, max_firings, bg, out)
    if status == 1:
        raise CascadeOverflow(
            f"cascade from unit {origin} exceeded {max_firings} firings")
    if status == 2:
        raise MemoryError()
    return out[0], out[1], out[2]


def train(double[:, ::1] weights, long long[::1] counters,
          const int[:, ::1] near, const int[::1] degree, const int[:, ::1] far,
          const double[:, ::1] data, const long long[::1] order,
          const double[::1] lc_arr, const double[::1] p_arr, Py_ssize_t e,
          long long theta, double l_s, bint include_far, bint repulsive,
          Py_ssize_t max_firings, Py_ssize_t audit_from, rng,
          long long[::1] out_gmu, long long[::1] out_bmu, double[::1] out_q,
          long long[::1] out_firings, long long[::1] out_updates):
    if e > 0 and far.shape[1] == 0:
        raise ValueError("exploration requires far links")
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t t, k, g, steps, m = order.shape[0], d = weights.shape[1]
    cdef Py_ssize_t cres[3]
    cdef double q, bq
    cdef const double[::1] s
    cdef int status = 0
    cdef Py_ssize_t failed_at = -1
    with rng.bit_generator.lock, nogil:
        for t in range(m):
            s = data[order[t]]
            if t >= audit_from:
                out_bmu[t] = _exact_bmu(weights, s, &bq)
            g = _search(weights, near, degree, far, s, e, include_far, bg,
                        &q, &steps)
            out_gmu[t] = g
            out_q[t] = sqrt(q)
            if t >= audit_from and q == bq:
                out_bmu[t] = g
            for k in range(d):
                weights[g, k] += l_s * (s[k] - weights[g, k])
            if bg.next_double(bg.state) < p_arr[t]:
                counters[g] += 1
            if counters[g] >= theta:
                status = _cascade(weights, counters, near, degree, g, theta,
                                  lc_arr[t], p_arr[t], repulsive, False,
                                  max_firings, bg, cres)
                if status != 0:
                    failed_at = t
                    break
                out_firings[t] = cres[0]
                out_updates[t] = cres[1]
    if status == 1:
        raise CascadeOverflow(
            f"cascade at training index {failed_at} exceeded {max_firings} firings")
    if status == 2:
        raise MemoryError()
    return m
