from __future__ import annotations

import math

import numpy as np
import pytest

from rcmlab import heatkernel, metric
from rcmlab.analysis import kernels
from rcmlab.errors import ConfigurationError, TruncationError

from conftest import make_field


def test_gaussian_kernel_at_origin():
    assert kernels.gaussian_kernel(np.zeros(2), 1.0, 2.0, 2) == pytest.approx(1 / (4 * math.pi))


def test_gaussian_tail_negligible():
    x = np.array([9.0, 0.0])  # |x|^2 / (2 sigma^2 t) = 81 / 4 > 20
    assert kernels.gaussian_kernel(x, 1.0, 2.0, 2) < 1e-8


def test_homogeneous_diagonal_matches_solver():
    f = make_field("constant:1", 3, 24)
    times = [0.5, 1.0, 3.0]
    k = heatkernel.solve_kernel(f, (12, 12, 12), times, tol=1e-12)
    got = k.values[:, f.lattice.index((12, 12, 12))]
    assert np.allclose(got, kernels.homogeneous_diagonal(times, 3), atol=1e-11)


def test_green_constant_values():
    assert kernels.green_constant(3, 2.0) == pytest.approx(1 / (4 * math.pi))
    # d = 4: Gamma(1) / (2 pi^2 sigma^2)
    assert kernels.green_constant(4, 2.0) == pytest.approx(1 / (4 * math.pi**2))


def test_llt_homogeneous_small_grid():
    rep = kernels.llt_check("constant:1", n_list=(4, 16, 64))
    assert rep.verdicts["error_decreasing"]
    assert rep.value("k_t(0)") == pytest.approx(1 / (4 * math.pi))


def test_llt_truncation():
    with pytest.raises(TruncationError):
        kernels.llt_check("constant:1", side=20)


def test_envelope_homogeneous_matches_exact_c3():
    rep = kernels.envelope_suite("constant:1", side=32, times=(1, 2, 4, 8, 16), seeds=2)
    assert rep.verdicts["c3_matches_homogeneous"]
    assert rep.passed


def test_envelope_lower_regime_excludes_ballistic_range():
    f = make_field("pareto:2", 2, 24, seed=1)
    k = heatkernel.solve_kernel(f, (12, 12), [1, 2, 4], tol=1e-6)
    rep = kernels.envelope_check(k, f, metric.fpp_distances(f, (12, 12)), eta=0.5)
    assert rep.passed
    # with t_min above every time the lower regime is empty
    with pytest.raises(ConfigurationError):
        kernels.envelope_check(k, f, t_min=10.0)


def test_nash_pareto():
    rep = kernels.nash_check("pareto:2", side=96, times=(4, 8, 16, 32), seed=2)
    assert rep.passed
    assert rep.value("max_mass_error") <= 1e-6


def test_green_small_box_properties():
    rep = kernels.green_asymptotics("constant:1", d=3, box=24, radii=(4, 8))
    assert rep.verdicts["maximum_principle"]
    # lattice anisotropy fades with |x| once the box offset is removed (shells 2..5
    # of a 24^3 box; further out the quartic boundary term takes over)
    spreads = [rep.value(f"corrected_spread[{k}]") for k in range(2, 6)]
    assert all(b < a for a, b in zip(spreads, spreads[1:]))
    assert rep.value("C_target") == pytest.approx(1 / (4 * math.pi))
    with pytest.raises(ConfigurationError):
        kernels.green_asymptotics("constant:1", d=2, box=16, radii=(2, 4))
