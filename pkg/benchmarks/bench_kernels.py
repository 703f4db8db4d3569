#!/usr/bin/env python3
"""Compare the compiled and pure-Python kernels on identical inputs.

Times three workloads per backend (heuristic search, a cascade from a loaded
lattice, and a short training run) and checks that both backends produce the
same results bit for bit.  Writes a CSV if ``--csv`` is given.
"""

import argparse
import csv
import sys
import time

import numpy as np

from topomap._backend import get_kernels
from topomap.topology import make_topology


def _search(k, weights, topo, samples, e, seed):
    rng = np.random.default_rng(seed)
    return [k.search(weights, topo.near, topo.degree, topo.far, s, e, False, rng)[0]
            for s in samples]


def _cascades(k, weights, topo, n_origins, seed):
    rng = np.random.default_rng(seed)
    w = weights.copy()
    counters = np.full(topo.n_units, 3, dtype=np.int64)
    out = []
    for origin in rng.integers(0, topo.n_units, n_origins):
        counters[origin] = 4
        out.append(k.cascade(w, counters, topo.near, topo.degree, int(origin), 4,
                             0.1, 0.95, False, False, 50 * topo.n_units, rng))
        counters[counters < 3] += 1  # reload toward criticality
    return out, w


def _train(k, weights, topo, data, i_max, seed):
    rng = np.random.default_rng(seed)
    w = weights.copy()
    n = topo.n_units
    counters = np.zeros(n, dtype=np.int64)
    order = rng.integers(0, len(data), i_max).astype(np.int64)
    lc = np.linspace(0.9, 0.1, i_max)
    p = np.linspace(0.9, 0.5, i_max)
    out = [np.zeros(i_max, np.int64) for _ in range(2)] + [np.zeros(i_max)] + \
          [np.zeros(i_max, np.int64) for _ in range(2)]
    k.train(w, counters, topo.near, topo.degree, topo.far, data, order, lc, p, 3 * n, 4,
            0.05, False, False, 50 * n, i_max, rng, *out)
    return w, out


def timed(fn, *args):
    t = time.perf_counter()
    result = fn(*args)
    return time.perf_counter() - t, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-side", type=int, default=10)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--searches", type=int, default=200)
    ap.add_argument("--cascades", type=int, default=200)
    ap.add_argument("--train-samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)

    try:
        backends = {"cython": get_kernels("cython"), "python": get_kernels("python")}
    except ImportError as exc:
        print(f"compiled kernels unavailable: {exc}", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    topo = make_topology(args.n_side, min(20, args.n_side ** 2 - 5), args.seed)
    weights = rng.random((topo.n_units, args.dim))
    samples = rng.random((args.searches, args.dim))
    data = rng.random((500, args.dim))
    e = 3 * topo.n_units

    rows, results = [], {}
    for name, k in backends.items():
        t_s, r_s = timed(_search, k, weights, topo, samples, e, args.seed)
        t_c, r_c = timed(_cascades, k, weights, topo, args.cascades, args.seed)
        t_t, r_t = timed(_train, k, weights, topo, data, args.train_samples, args.seed)
        results[name] = (r_s, r_c, r_t)
        rows += [(name, "search", args.searches, t_s), (name, "cascade", args.cascades, t_c),
                 (name, "train", args.train_samples, t_t)]

    (cs, cc, ct), (ps, pc, pt) = results["cython"], results["python"]
    identical = (cs == ps and cc[0] == pc[0] and np.array_equal(cc[1], pc[1])
                 and np.array_equal(ct[0], pt[0])
                 and all(np.array_equal(a, b) for a, b in zip(ct[1], pt[1])))

    print(f"N={topo.n_units} d={args.dim} e={e}")
    print(f"{'backend':8s} {'workload':8s} {'calls':>7s} {'seconds':>9s} {'us/call':>10s}")
    for name, work, calls, sec in rows:
        print(f"{name:8s} {work:8s} {calls:7d} {sec:9.3f} {1e6 * sec / calls:10.1f}")
    for work in ("search", "cascade", "train"):
        tc = next(r[3] for r in rows if r[0] == "cython" and r[1] == work)
        tp = next(r[3] for r in rows if r[0] == "python" and r[1] == work)
        print(f"speedup {work:8s} {tp / tc:8.1f}x")
    print(f"results identical: {identical}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["backend", "workload", "calls", "seconds"])
            w.writerows(rows)
    return 0 if identical else 2


if __name__ == "__main__":
    sys.exit(main())
