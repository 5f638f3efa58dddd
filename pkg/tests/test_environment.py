from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcmlab import environment as env
from rcmlab.environment import ConductanceField, ConductanceLaw, LatticeSpec
from rcmlab.errors import ParameterError, UnsupportedOperationError

from conftest import make_field


def test_constant_field_has_mu_x_2d():
    for d in (1, 2, 3):
        f = make_field("constant:1", d, 5)
        assert np.all(f.mu == 1.0)
        assert np.all(f.mu_x == 2 * d)


def test_free_box_interior_weights():
    f = make_field("constant:1", 2, 5, "free")
    interior = [f.lattice.index((i, j)) for i in range(1, 4) for j in range(1, 4)]
    assert np.all(f.mu_x[interior] == 4)
    assert f.mu_x[f.lattice.index((0, 0))] == 2


def test_pareto_mean_within_three_se():
    lat = LatticeSpec.cube(2, 708, "torus")  # ~10^6 edges
    f = env.generate(lat, ConductanceLaw.pareto(2.0), 11)
    m = env.empirical_mean_mu(f)
    se = f.mu.std(ddof=1) / np.sqrt(lat.n_edges)
    assert abs(m - 2.0) <= 3 * se


def test_pareto3_empirical_mean():
    lat = LatticeSpec.cube(2, 708, "torus")
    f = env.generate(lat, ConductanceLaw.pareto(3.0), 5)
    se = np.sqrt(ConductanceLaw.pareto(3.0).variance / lat.n_edges)
    assert abs(env.empirical_mean_mu(f) - 1.5) <= 3 * se


def test_empirical_mean_examples():
    assert env.empirical_mean_mu(make_field("constant:3", 2, 4)) == 3.0
    lat = LatticeSpec(1, (3,), "free")
    f = ConductanceField(lat, np.array([1.0, 3.0]), ConductanceLaw.explicit([1.0, 3.0]))
    assert env.empirical_mean_mu(f) == 2.0


def test_generate_deterministic():
    a = make_field("pareto:1.5", 2, 12, seed=4)
    b = make_field("pareto:1.5", 2, 12, seed=4)
    c = make_field("pareto:1.5", 2, 12, seed=5)
    assert np.array_equal(a.mu, b.mu)
    assert not np.array_equal(a.mu, c.mu)


@pytest.mark.parametrize("text", ["pareto:0", "pareto:-1", "two_point:0.5,0.1", "uniform:3,2",
                                  "uniform:0.5,2", "constant:0.5", "bogus:1"])
def test_invalid_laws(text):
    with pytest.raises(ParameterError):
        ConductanceLaw.parse(text)


def test_law_parse_roundtrip():
    for text in ["constant:1", "uniform:1,3", "pareto:0.5", "two_point:100,0.1"]:
        assert str(ConductanceLaw.parse(text)) == text


def test_neighbors_torus_wraps():
    f = make_field("constant:1", 2, 4)
    nb = env.neighbors(f, (0, 0))
    sites = [s for s, _, _ in nb]
    assert len(nb) == 4
    assert (3, 0) in sites and (0, 3) in sites
    # axis-major, minus then plus
    assert sites == [(3, 0), (1, 0), (0, 3), (0, 1)]


def test_neighbors_free_and_3d():
    assert len(env.neighbors(make_field("constant:1", 2, 4, "free"), (0, 0))) == 2
    assert len(env.neighbors(make_field("constant:1", 3, 5), (2, 2, 2))) == 6
    with pytest.raises(IndexError):
        env.neighbors(make_field("constant:1", 2, 4), 99)


def test_edge_layout_lexicographic():
    lat = LatticeSpec.cube(2, 4, "torus")
    ends = lat.edge_ends
    for e in range(lat.n_edges):
        site, axis = divmod(e, 2)
        x = lat.coords(site)
        y = x.copy()
        y[axis] = (y[axis] + 1) % 4
        assert ends[e, 0] == site and ends[e, 1] == lat.index(tuple(y))


def test_shift_identities():
    f = make_field("pareto:2", 2, 6, seed=3)
    assert env.shift(f, (0, 0)) == f
    assert env.shift(env.shift(f, (2, 5)), (-2, -5)) == f
    assert env.shift(f, (6, 0)) == f
    with pytest.raises(UnsupportedOperationError):
        env.shift(make_field("constant:1", 2, 4, "free"), (1, 0))


def test_shift_moves_edges():
    f = make_field("pareto:2", 2, 6, seed=3)
    g = env.shift(f, (1, 2))
    # T_x omega (z, w) = omega(z + x, w + x)
    for z in [(0, 0), (3, 4), (5, 5)]:
        for k in range(2):
            w = list(z)
            w[k] += 1
            zx = (z[0] + 1, z[1] + 2)
            wx = (w[0] + 1, w[1] + 2)
            assert g.conductance(f.lattice.wrap(z), f.lattice.wrap(w)) == \
                f.conductance(f.lattice.wrap(zx), f.lattice.wrap(wx))


@given(seed=st.integers(0, 2**32), a=st.integers(-7, 7), b=st.integers(-7, 7),
       c=st.integers(-7, 7), e=st.integers(-7, 7))
def test_shift_group_law(seed, a, b, c, e):
    f = make_field("uniform:1,5", 2, 5, seed=seed)
    assert env.shift(env.shift(f, (a, b)), (c, e)) == env.shift(f, (a + c, b + e))
    assert sorted(env.shift(f, (a, b)).mu) == sorted(f.mu)


@given(seed=st.integers(0, 2**32), law=st.sampled_from(["pareto:0.5", "pareto:3", "two_point:50,0.3",
                                                         "uniform:1,2"]))
def test_conductances_at_least_one(seed, law):
    f = make_field(law, 2, 6, seed=seed)
    assert np.all(f.mu >= 1.0)


def test_rcmenv_roundtrip(tmp_path):
    for boundary in ("torus", "free"):
        f = make_field("pareto:0.7", 3, 5, boundary, seed=9)
        p = tmp_path / f"f_{boundary}.rcmenv"
        env.save(f, p)
        g = env.load(p)
        assert g == f and g.lattice == f.lattice
        assert g.mu.tobytes() == f.mu.tobytes()
        assert str(g.law) == str(f.law) and g.seed == f.seed
    head = (tmp_path / "f_torus.rcmenv").read_bytes().split(b"\n", 1)[0]
    assert head.startswith(b"{")


def test_explicit_field_roundtrip(tmp_path):
    f = make_field("constant:1", 2, 4).planted({0: 50.0})
    env.save(f, tmp_path / "e.rcmenv")
    assert env.load(tmp_path / "e.rcmenv") == f


def test_jump_probs_sum_to_one(pareto_field):
    for x in range(0, pareto_field.n_sites, 17):
        assert pareto_field.jump_probs(x).sum() == pytest.approx(1.0)
