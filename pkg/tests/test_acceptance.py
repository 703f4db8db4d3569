"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Tolerances and thresholds are pinned here and never adjusted per run.  All
repeated runs use base seed 0 with repeat ``r`` at seed ``r * 1000`` (the same
scheme as the command-line sweeps).  Experiment-scale criteria carry the
``slow`` marker; the full-size classification runs carry ``expensive``.
"""

import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from scipy import stats
from scipy.spatial import Delaunay

from oracles import btw_stabilize, greedy_chain, lattice_neighbors, quantization_error as oracle_q
from topomap import TrainConfig, synthetic_square, train
from topomap.cascade import MapState, run_cascade
from topomap.classify import evaluate, label_units
from topomap.dataset import Dataset, normalize
from topomap.errors import CascadeOverflow
from topomap.experiments import SEED_STRIDE, collapse, pairwise_collapse_gap, split_for_classification
from topomap.metrics import (max_fractional_cascade, quantization_error, search_error,
                             topological_error, updates_per_sample)
from topomap.schedules import Schedules, cascade_learning_rate, cascade_probability
from topomap.search import heuristic_search
from topomap.topology import build_lattice, draw_far_links

SEEDS3 = [r * SEED_STRIDE for r in range(3)]
SEEDS5 = [r * SEED_STRIDE for r in range(5)]


def _q_t(trained, dataset):
    return (quantization_error(trained.state, dataset),
            topological_error(trained.state, trained.topology, dataset))


def _fmt(values):
    return "[" + ", ".join(f"{v:.4f}" for v in values) + "]"


# -- 1 -------------------------------------------------------------------------------


def _stabilize_with_library(initial, drops, discipline):
    n_side = initial.shape[0]
    topo = build_lattice(n_side)
    state = MapState.from_weights(np.zeros((n_side * n_side, 1)))
    state.counters[:] = initial.ravel()
    firings = 0
    for origin in drops:
        state.counters[origin] += 1
        firings += run_cascade(state, topo, int(origin), 0.1, 1.0, np.random.default_rng(0),
                               discipline=discipline).firings
    return state.counters.reshape(n_side, n_side), firings


def test_criterion_01_sandpile_oracle(record_criterion):
    rng = np.random.default_rng(2718)
    mismatches = abelian_breaks = total = 0
    for _ in range(50):
        initial = rng.integers(0, 4, (20, 20))
        drops = rng.integers(0, 400, 400)
        fifo, f_fifo = _stabilize_with_library(initial, drops, "fifo")
        lifo, f_lifo = _stabilize_with_library(initial, drops, "lifo")
        grid, topplings = initial.copy(), 0
        for origin in drops:
            grid.flat[origin] += 1
            grid, t = btw_stabilize(grid)
            topplings += t
        mismatches += not (np.array_equal(fifo, grid) and f_fifo == topplings)
        abelian_breaks += not (np.array_equal(fifo, lifo) and f_fifo == f_lifo)
        total += topplings
    ok = record_criterion(1, "sandpile oracle equivalence", mismatches == 0 and abelian_breaks == 0,
                          f"50 grids 20x20, {total} topplings, oracle mismatches {mismatches}, "
                          f"fifo/lifo differences {abelian_breaks}")
    assert ok


# -- 2 -------------------------------------------------------------------------------


def test_criterion_02_schedules(record_criterion):
    mpmath.mp.dps = 50
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(100):
        n = int(rng.choice([100, 400, 900, 1156, 2500]))
        i_max = int(rng.integers(100, 10**6))
        i = int(rng.integers(0, i_max + 1))
        s = Schedules(c_o=float(rng.uniform(0, 1)), c_s=float(rng.uniform(0.1, 1)),
                      c_m=float(rng.uniform(1.5 / n, 1)), c_d=float(rng.uniform(1, 2000)),
                      i_max=i_max, n_units=n)
        x = (mpmath.mpf(s.c_o) - mpmath.mpf(i) / i_max) / mpmath.mpf(s.c_s)
        lc_ref = (1 + mpmath.tanh(x)) / 2
        p_ref = ((1 - 1 / mpmath.sqrt(mpmath.mpf(s.c_m) * n))
                 * (1 - mpmath.mpf(i) / i_max) ** (mpmath.mpf(s.c_d) / n))
        for got, ref in ((cascade_learning_rate(i, s), lc_ref), (cascade_probability(i, s), p_ref)):
            if ref == 0:
                assert got == 0.0
                continue
            worst = max(worst, float(abs((mpmath.mpf(got) - ref) / ref)))
    ok = record_criterion(2, "schedule formulas", worst <= 1e-12,
                          f"100 points, worst relative error {worst:.2e} (limit 1e-12)")
    assert ok


# -- 3 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_03_search_accuracy(record_criterion, mnist5k):
    base = TrainConfig(n_side=20, audit_bmu=True, audit_window=1000)
    n = base.n_units
    f = {}
    for label, e in (("0.1N", int(round(0.1 * n))), ("3N", 3 * n)):
        f[label] = [search_error(train(replace(base, e=e).with_seed(s), mnist5k).log)
                    for s in SEEDS3]
    f_hi, f_lo = np.mean(f["3N"]), np.mean(f["0.1N"])
    ok = record_criterion(3, "search accuracy trend", f_hi < 0.05 and f_hi < f_lo,
                          f"MNIST-5k 20x20, F(3N)={f_hi:.4f} {_fmt(f['3N'])}, "
                          f"F(0.1N)={f_lo:.4f} {_fmt(f['0.1N'])}")
    assert ok


# -- 4 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_04_collapse(record_criterion, tmp_path):
    ds = synthetic_square(2000, seed=0)
    traj = collapse(TrainConfig(n_side=20).with_seed(0), ds, [20, 30], tmp_path)
    gap = pairwise_collapse_gap(traj)
    peaks = {n: float(v.max()) for n, (_, v) in traj.items()}
    ok = record_criterion(4, "scale-invariant cascading", gap < 0.15,
                          f"N=400 vs 900 mean |difference| {gap:.4f} (limit 0.15), "
                          f"peak trajectory values {peaks}")
    assert ok


# -- 5 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_05_decay_tradeoff(record_criterion):
    ds = synthetic_square(2000, seed=0)
    res = {}
    for c_d in (100.0, 1000.0):
        runs = [_q_t(train(TrainConfig(n_side=20, c_d=c_d).with_seed(s), ds), ds) for s in SEEDS3]
        res[c_d] = np.mean(runs, axis=0)
    (q1, t1), (q2, t2) = res[100.0], res[1000.0]
    ok = record_criterion(5, "cascade-decay trade-off", q2 < q1 and t2 > t1,
                          f"N=400 c_d=100: Q={q1:.5f} T={t1:.4f}; c_d=1000: Q={q2:.5f} T={t2:.4f}")
    assert ok


# -- 6 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_06_scalability(record_criterion, satimage_raw):
    ds = normalize(satimage_raw)
    res = {}
    for n_side in (10, 30):
        runs = [_q_t(train(TrainConfig(n_side=n_side).with_seed(s), ds), ds) for s in SEEDS3]
        res[n_side] = np.mean(runs, axis=0)
    (q1, t1), (q2, t2) = res[10], res[30]
    ok = record_criterion(6, "scalability trend", q2 < q1 and t2 < t1,
                          f"SatImage N=100: Q={q1:.4f} T={t1:.4f}; N=900: Q={q2:.4f} T={t2:.4f}")
    assert ok


# -- 7 and 8 -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def satimage_runs(satimage_raw):
    train_set, test_set = split_for_classification(satimage_raw, n_train=4435, seed=0)
    runs = []
    for s in SEEDS3:
        trained = train(TrainConfig(n_side=34, c_d=1000.0).with_seed(s), train_set)
        result = evaluate(label_units(trained, train_set), test_set)
        runs.append(dict(precision=100 * result.precision, recall=100 * result.recall,
                         ups=updates_per_sample(trained.log),
                         max_a=max_fractional_cascade(trained.log)))
    return runs


@pytest.mark.slow
@pytest.mark.expensive
def test_criterion_07_classification(record_criterion, satimage_runs):
    prec = [r["precision"] for r in satimage_runs]
    rec = [r["recall"] for r in satimage_runs]
    ok = record_criterion(7, "SatImage classification",
                          np.mean(prec) >= 85.0 and np.mean(rec) >= 85.0,
                          f"34x34 c_d=1000, precision {np.mean(prec):.2f} {_fmt(prec)}, "
                          f"recall {np.mean(rec):.2f} {_fmt(rec)} (limit 85)")
    assert ok


@pytest.mark.slow
@pytest.mark.expensive
def test_criterion_08_update_accounting(record_criterion, satimage_runs):
    ups = [r["ups"] for r in satimage_runs]
    max_a = [r["max_a"] for r in satimage_runs]
    ups_ok = 2.0 <= np.mean(ups) <= 5.0
    a_ok = 0.3 <= np.mean(max_a) <= 1.5
    ok = record_criterion(8, "update accounting", ups_ok and a_ok,
                          f"updates/sample {np.mean(ups):.3f} {_fmt(ups)} in [2, 5]: {ups_ok}; "
                          f"max fractional cascade {np.mean(max_a):.4f} {_fmt(max_a)} "
                          f"in [0.3, 1.5]: {a_ok}")
    assert ok


# -- 9 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_09_async_consistency(record_criterion):
    ds = synthetic_square(2000, seed=0)
    seq = np.array([_q_t(train(TrainConfig(n_side=10).with_seed(s), ds), ds) for s in SEEDS5])
    asy = np.array([_q_t(train(TrainConfig(n_side=10, engine="async", drive="quiescent")
                               .with_seed(s), ds), ds) for s in SEEDS5])
    q_ok = seq[:, 0].min() <= asy[:, 0].mean() <= seq[:, 0].max()
    t_ok = seq[:, 1].min() <= asy[:, 1].mean() <= seq[:, 1].max()
    ok = record_criterion(9, "async/sequential consistency", q_ok and t_ok,
                          f"async mean Q {asy[:, 0].mean():.5f} in sequential "
                          f"[{seq[:, 0].min():.5f}, {seq[:, 0].max():.5f}]: {q_ok}; "
                          f"async mean T {asy[:, 1].mean():.4f} in sequential "
                          f"[{seq[:, 1].min():.4f}, {seq[:, 1].max():.4f}]: {t_ok}; "
                          f"async T {_fmt(asy[:, 1])}, sequential T {_fmt(seq[:, 1])}")
    assert ok


# -- 10 ------------------------------------------------------------------------------


def _hull_preserved():
    rng = np.random.default_rng(5)
    # samples in a small disk: the hull of samples and initial weights is a strict
    # subset of the unit square, so leaving it would be visible
    ang = rng.uniform(0, 2 * np.pi, 800)
    rad = 0.15 * np.sqrt(rng.random(800))
    ds = Dataset(np.column_stack([0.5 + rad * np.cos(ang), 0.5 + rad * np.sin(ang)]))
    ok = True
    for engine in ("sequential", "async"):
        cfg = TrainConfig(n_side=6, phi=4, i_max=3000, engine=engine).with_seed(0)
        trained = train(cfg, ds)
        initial = np.random.default_rng(cfg.seed_weights).random((36, 2))
        hull = Delaunay(np.vstack([ds.samples, initial]))
        ok &= bool((hull.find_simplex(trained.weights, tol=1e-12) >= 0).all())
    return ok


def _cap_terminates():
    topo = build_lattice(4)
    state = MapState(np.zeros((16, 1)), np.full(16, 1, dtype=np.int64), theta=2)
    state.counters[5] = 2
    try:
        run_cascade(state, topo, 5, 0.1, 1.0, np.random.default_rng(0), max_firings=100)
        return False
    except CascadeOverflow:
        pass
    # an ordinary critical grid terminates well below the cap and ends stable
    rng = np.random.default_rng(6)
    state = MapState.from_weights(rng.random((400, 2)))
    state.counters[:] = 3
    state.counters[210] = 4
    rec = run_cascade(state, build_lattice(20), 210, 0.3, 1.0, rng, max_firings=50 * 400)
    return rec.firings > 0 and state.counters.max() < 4


def _greedy_monotone():
    rng = np.random.default_rng(7)
    n_side = 12
    from topomap.topology import make_topology

    topo = make_topology(n_side, 6, seed=3)
    state = MapState.from_weights(rng.random((n_side * n_side, 3)))
    for k in range(200):
        sample = rng.random(3)
        start = int(np.random.default_rng(k).random() * state.n_units)
        res = heuristic_search(state, topo, sample, 0, np.random.default_rng(k))
        chain = greedy_chain(state.weights, n_side, start, sample)
        q = ((state.weights - sample) ** 2).sum(axis=1)
        if chain[-1] != res.gmu or len(chain) - 1 != res.greedy_steps:
            return False
        if not all(q[a] > q[b] for a, b in zip(chain, chain[1:])):
            return False
        if any(q[j] < q[res.gmu] for j in lattice_neighbors(res.gmu, n_side)):
            return False
    return True


def _far_link_chi_square():
    n_side, draws = 30, 100_000
    rng = np.random.default_rng(2024)
    unit = 7 * n_side + 4
    r0, c0 = divmod(unit, n_side)
    ids = np.arange(n_side * n_side)
    dist = np.abs(ids // n_side - r0) + np.abs(ids % n_side - c0)
    cand = dist >= 2
    norm = np.sum(1.0 / dist[cand])
    shells = np.unique(dist[cand])
    p_shell = np.array([np.sum(dist == d) / d / norm for d in shells])
    counts = np.zeros(dist.max() + 1, dtype=np.int64)
    for _ in range(draws):
        counts[dist[draw_far_links(unit, n_side, 1, rng)[0]]] += 1
    obs, expected = counts[shells], draws * p_shell
    sigma = np.sqrt(draws * p_shell * (1 - p_shell))
    chi2 = float(np.sum((obs - expected) ** 2 / expected))
    p_value = stats.chi2.sf(chi2, len(shells) - 1)
    return counts[:2].sum() == 0 and bool(np.all(np.abs(obs - expected) <= 3 * sigma)), p_value


def _sequential_deterministic():
    ds = synthetic_square(500, seed=1)
    cfg = TrainConfig(n_side=8, phi=5).with_seed(42)
    a, b = train(cfg, ds), train(cfg, ds)
    return (np.array_equal(a.weights, b.weights) and np.array_equal(a.state.counters, b.state.counters)
            and np.array_equal(a.log.gmu, b.log.gmu)
            and np.array_equal(a.log.cascade_firings, b.log.cascade_firings)
            and math.isclose(oracle_q(a.weights, ds.samples), oracle_q(b.weights, ds.samples)))


def test_criterion_10_invariants(record_criterion):
    chi_ok, p_value = _far_link_chi_square()
    checks = {
        "convex hull": _hull_preserved(),
        "hard cap": _cap_terminates(),
        "greedy monotone": _greedy_monotone(),
        "far-link 3 sigma": chi_ok,
        "deterministic": _sequential_deterministic(),
    }
    detail = ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items())
    ok = record_criterion(10, "invariant suite", all(checks.values()),
                          f"{detail}, chi-square p={p_value:.3f}")
    assert ok
