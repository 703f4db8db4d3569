import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from topomap.errors import InvalidArgument
from topomap.topology import (Topology, build_lattice, draw_far_links, make_topology,
                              manhattan_distance, sample_far_links)


def xy(x, y, n_side):
    return y * n_side + x


def test_interior_neighbors():
    t = build_lattice(3)
    assert set(t.near_of(xy(1, 1, 3))) == {xy(0, 1, 3), xy(2, 1, 3), xy(1, 0, 3), xy(1, 2, 3)}


def test_corner_neighbors():
    t = build_lattice(3)
    assert set(t.near_of(0)) == {xy(1, 0, 3), xy(0, 1, 3)}


def test_two_by_two_all_corners():
    t = build_lattice(2)
    assert t.degree.tolist() == [2, 2, 2, 2]


@pytest.mark.parametrize("n_side", [0, 1, -3])
def test_too_small(n_side):
    with pytest.raises(InvalidArgument):
        build_lattice(n_side)


def test_manhattan_examples():
    assert manhattan_distance(xy(0, 0, 5), xy(2, 3, 5), 5) == 5
    assert manhattan_distance(7, 7, 5) == 0
    assert manhattan_distance(0, 24, 5) == 8


@given(st.integers(2, 12))
def test_degree_sums(n_side):
    t = build_lattice(n_side)
    assert t.degree.sum() == 4 * n_side * (n_side - 1)
    interior = [j for j in range(t.n_units)
                if 0 < j % n_side < n_side - 1 and 0 < j // n_side < n_side - 1]
    assert t.degree[interior].sum() == 4 * (n_side - 2) ** 2


@given(st.integers(2, 9))
def test_near_symmetric_and_distance_one(n_side):
    t = build_lattice(n_side)
    for j in range(t.n_units):
        for k in t.near_of(j):
            assert j in t.near_of(k)
            assert manhattan_distance(j, k, n_side) == 1
        brute = {k for k in range(t.n_units) if manhattan_distance(j, k, n_side) == 1}
        assert set(t.near_of(j)) == brute
        assert t.near_of(j) == sorted(t.near_of(j))


def test_far_link_invariants():
    t = make_topology(10, 20, seed=3)
    assert t.far.shape == (100, 20)
    for j in range(100):
        far = t.far_of(j)
        assert len(set(far)) == 20
        assert all(manhattan_distance(j, k, 10) >= 2 for k in far)


def test_far_links_deterministic():
    a = make_topology(8, 10, seed=5)
    b = make_topology(8, 10, seed=5)
    c = make_topology(8, 10, seed=6)
    assert np.array_equal(a.far, b.far)
    assert not np.array_equal(a.far, c.far)


def test_phi_too_large():
    # a corner of a 3x3 lattice has 9 - 1 - 2 = 6 candidates; the centre only 4
    with pytest.raises(InvalidArgument):
        sample_far_links(build_lattice(3), 5, 0)
    sample_far_links(build_lattice(3), 4, 0)


def test_far_links_first_draw_distribution():
    """Per distance shell, first-draw counts lie within 3 sigma of the enumerated 1/D law."""
    n_side, draws = 30, 100_000
    rng = np.random.default_rng(2024)
    ids = np.arange(n_side * n_side)
    dist = ids % n_side + ids // n_side  # distance from unit 0
    # the normalizer is enumerated independently of the library's weight helper
    cand = dist >= 2
    norm = sum(1.0 / d for d in dist[cand])
    shells = np.unique(dist[cand])
    p_shell = np.array([np.sum(dist == D) / D / norm for D in shells])
    counts = np.zeros(dist.max() + 1, dtype=np.int64)
    for _ in range(draws):
        counts[dist[draw_far_links(0, n_side, 1, rng)[0]]] += 1
    assert counts[:2].sum() == 0
    obs = counts[shells]
    expected = draws * p_shell
    sigma = np.sqrt(draws * p_shell * (1 - p_shell))
    assert np.all(np.abs(obs - expected) <= 3 * sigma), np.max(np.abs(obs - expected) / sigma)
    chi2 = float(np.sum((obs - expected) ** 2 / expected))
    assert stats.chi2.sf(chi2, len(shells) - 1) > 1e-3


def test_without_replacement_renormalizes():
    # with phi equal to the candidate count, every candidate is drawn exactly once
    rng = np.random.default_rng(0)
    out = draw_far_links(0, 4, 13, rng)
    assert sorted(out.tolist()) == sorted(k for k in range(16) if manhattan_distance(0, k, 4) >= 2)


def test_round_trip(tmp_path):
    t = make_topology(6, 5, seed=11)
    t.save(tmp_path / "t.json")
    u = Topology.load(tmp_path / "t.json")
    assert np.array_equal(t.far, u.far) and np.array_equal(t.near, u.near)
    assert u.seed == 11 and u.phi == 5
