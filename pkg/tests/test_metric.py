from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcmlab import metric
from rcmlab.environment import ConductanceLaw, LatticeSpec
from rcmlab.errors import ParameterError, TruncationError, UnsupportedOperationError

from conftest import make_field
from oracles import brute_force_fpp, grid_edges_free


def test_graph_distance_examples():
    lat = LatticeSpec.cube(2, 20)
    d = metric.graph_distance(lat, (0, 0))
    assert d[lat.index((2, 3))] == 5
    assert d[lat.index((0, 0))] == 0
    lat6 = LatticeSpec.cube(2, 6)
    assert metric.graph_distance(lat6, (0, 0))[lat6.index((5, 0))] == 1


def test_fpp_homogeneous_equals_graph_distance():
    f = make_field("constant:1", 2, 9, "free")
    x0 = (4, 4)
    assert np.array_equal(metric.fpp_distances(f, x0).dist, metric.graph_distance(f, x0).astype(float))


def test_fpp_single_fast_edge():
    f = make_field("constant:1", 2, 5)
    e = f.edge_between((2, 2), (3, 2))
    g = f.planted({e: 4.0})
    d = metric.fpp_distances(g, (2, 2)).dist
    assert d[g.lattice.index((3, 2))] == 0.5


def fpp_oracle_case(seed: int, side: int = 4):
    f = make_field("pareto:1", 2, side, "free", seed=seed)
    w = metric.edge_times(f)
    weights = {tuple(sorted(int(v) for v in ab)): w[k] for k, ab in enumerate(f.lattice.edge_ends)}
    assert set(weights) == set(grid_edges_free(side))
    src = seed % f.n_sites
    return metric.fpp_distances(f, src).dist, brute_force_fpp(side, weights, src)


def test_fpp_matches_brute_force_enumeration():
    for seed in range(20):
        got, want = fpp_oracle_case(seed)
        assert np.array_equal(got, want)


def test_fpp_rejects_bad_ca(homogeneous):
    with pytest.raises(ParameterError):
        metric.fpp_distances(homogeneous, 0, 0.0)


@given(seed=st.integers(0, 2**31), c_a=st.sampled_from([0.5, 1.0, 2.0]))
def test_fpp_triangle_and_lipschitz(seed, c_a):
    f = make_field("pareto:1.5", 2, 5, "free", seed=seed)
    D = metric.fpp_all_pairs(f, c_a)
    G = np.array([metric.graph_distance(f, x) for x in range(f.n_sites)])
    # triangle inequality through every intermediate site
    for x in range(f.n_sites):
        assert np.all(D[x][None, :] <= D[x][:, None] + D + 1e-12)
    assert np.all(D <= c_a * G + 1e-12)
    ends = f.lattice.edge_ends
    w = metric.edge_times(f, c_a)
    assert np.all(np.abs(D[:, ends[:, 0]] - D[:, ends[:, 1]]) <= w + 1e-12)


def test_lambda_good_examples():
    f = make_field("constant:1", 2, 11)
    for r in (1, 2, 5):
        assert metric.is_lambda_good(f, (5, 5), r, 1.0, 5)
    hand = make_field("constant:1", 2, 5, "free")
    e = hand.edge_between((2, 2), (3, 2))
    fast = hand.planted({e: 100.0})
    assert not metric.is_lambda_good(fast, (2, 2), 1, 1.0, 2)
    p = make_field("pareto:0.5", 2, 11, seed=2)
    assert metric.is_lambda_good(p, (5, 5), 1, 1e12, 5)
    with pytest.raises(TruncationError):
        metric.is_lambda_good(f, (5, 5), 1, 1.0, 6)


@given(seed=st.integers(0, 2**31), lam=st.floats(1.0, 4.0))
def test_lambda_good_implies_distance_bound(seed, lam):
    f = make_field("pareto:1", 2, 13, seed=seed)
    x = (6, 6)
    n_max = 6
    dg = metric.graph_distance(f, x)
    df = metric.fpp_distances(f, x).dist
    for r in range(1, n_max + 1):
        if metric.is_lambda_good(f, x, r, lam, n_max):
            sel = (dg >= r) & (dg <= n_max)
            assert np.all(df[sel] >= dg[sel] / lam - 1e-12)


def test_very_good_radius_homogeneous():
    f = make_field("constant:1", 2, 21)
    rep = metric.very_good_radius(f, (10, 10), 1.0, 0.5, 6)
    assert rep.very_good_radius == 1 and rep.good_radius == 1


@given(seed=st.integers(0, 2**31))
def test_very_good_monotone(seed):
    f = make_field("pareto:1", 2, 17, seed=seed)
    rep = metric.very_good_radius(f, (8, 8), 2.0, 0.5, 6)
    if rep.very_good_radius is not None:
        # every larger radius passes as well: recompute the definition directly
        lat = f.lattice
        dx = metric.graph_distance(f, (8, 8))
        for R in range(rep.very_good_radius, 7):
            for y in np.nonzero(dx < R)[0]:
                ny = min(6, metric._max_inbox_radius(lat, int(y)))
                need = max(int(np.ceil(R ** 0.5)), 1)
                if need <= ny:
                    assert metric.is_lambda_good(f, int(y), need, 2.0, ny)


def test_shrinkage_trivial_cases():
    lat = LatticeSpec.cube(2, 21)
    p, se = metric.shrinkage_probability(ConductanceLaw.constant(1.0), lat, 1.0, 1.01, 5, 5, 0)
    assert p == 1.0 and se == 0.0
    # edge times >= 1/2 put the fpp ball of radius r inside the graph ball of radius 2r
    p, _ = metric.shrinkage_probability(ConductanceLaw.two_point(4.0, 0.5), lat, 1.0, 4.0, 2, 20, 0)
    assert p == 1.0
    with pytest.raises(TruncationError):
        metric.shrinkage_probability(ConductanceLaw.constant(1.0), lat, 1.0, 3.0, 5, 2, 0)
    with pytest.raises(ParameterError):
        metric.shrinkage_probability(ConductanceLaw.constant(1.0), lat, 1.0, 1.0, 2, 0, 0)


def test_distance_csv(tmp_path, homogeneous):
    p = tmp_path / "d.csv"
    metric.write_distance_csv(p, homogeneous, (0, 0))
    rows = p.read_text().splitlines()
    assert rows[0] == "x1,x2,d_graph,d_fpp"
    assert len(rows) == 1 + homogeneous.n_sites


def test_shrinkage_rejects_explicit_field():
    lat = LatticeSpec.cube(2, 9, "torus")
    law = ConductanceLaw.explicit(np.ones(lat.n_edges))
    with pytest.raises(UnsupportedOperationError):
        metric.shrinkage_probability(law, lat, 1.0, 1.5, 2, 3, 0)
