from __future__ import annotations

import numpy as np
import pytest

from rcmlab import corrector, walk
from rcmlab.analysis import diffusion
from rcmlab.errors import ConfigurationError, ParameterError, TruncationError

from conftest import make_field


def test_msd_csrw_homogeneous_slope():
    est = diffusion.msd_slope("constant:1", walk.CSRW, [4, 8, 16, 32, 64], 10_000, seed=1, side=64)
    assert est.method == "msd_slope"
    for s in est.sigma2:
        assert s == pytest.approx(0.5, rel=0.05)


def test_msd_single_path_does_not_crash():
    est = diffusion.msd_slope("constant:1", walk.VSRW, [1, 10], 1, seed=0, side=16)
    assert all(se == np.inf for se in est.se)
    with pytest.raises(ParameterError):
        diffusion.msd_slope("constant:1", walk.VSRW, [1], 10, seed=0, side=16)


def test_stationary_starts_follow_weights():
    f = make_field("two_point:20,0.3", 2, 8, seed=2)
    s = diffusion.stationary_starts(f, walk.CSRW, 200_000, seed=1)
    freq = np.bincount(s, minlength=f.n_sites) / len(s)
    want = f.mu_x / f.mu_x.sum()
    assert np.max(np.abs(freq - want)) < 5 * np.sqrt(want.max() / len(s))
    v = diffusion.stationary_starts(f, walk.VSRW, 10, seed=1)
    assert v.shape == (10,)


@pytest.mark.parametrize("c", [1.0, 3.0])
def test_einstein_homogeneous(c):
    rep = diffusion.einstein_check(f"constant:{c:g}", d=2, side=32, paths=4000, n_seeds=2,
                                   t_grid=(8, 16, 32, 64))
    assert rep.passed
    for k in range(2):
        assert rep.value(f"seed{k}.sigma2_C") == pytest.approx(0.5, rel=0.1)
        assert rep.value(f"seed{k}.sigma2_V") == pytest.approx(2 * c, rel=0.1)


def test_einstein_rejects_infinite_mean():
    with pytest.raises(ConfigurationError):
        diffusion.einstein_check("pareto:0.5")


@pytest.mark.parametrize("law", ["constant:1", "pareto:3", "pareto:2"])
def test_estimator_consistency(law):
    f = make_field(law, 2, 64, seed=4)
    corr = corrector.sigma2_from_corrector(corrector.solve_corrector(f)).isotropic
    msd = diffusion.msd_slope(f, walk.VSRW, [16, 32, 64, 128, 256], 10_000, seed=4).isotropic
    assert msd == pytest.approx(corr, rel=0.10)


def test_anomalous_control_finite_mean():
    rep = diffusion.anomalous_check(3.0, 2, t_grid=(10, 31.6, 100, 316, 1000), paths=600, seed=1, side=256,
                                    n_env=2)
    assert rep.value("CSRW.exponent") == pytest.approx(1.0, abs=0.1)
    assert rep.value("VSRW.exponent") == pytest.approx(1.0, abs=0.1)


def test_fclt_homogeneous_and_controls():
    rep = diffusion.fclt_test("constant:1", paths=4000, seed=2)
    assert rep.verdicts["normality_at_smallest_eps"]
    assert rep.verdicts["increments_uncorrelated"] and rep.verdicts["coordinates_uncorrelated"]
    assert rep.verdicts["drift_control_rejected"]
    with pytest.raises(TruncationError):
        diffusion.fclt_test("constant:1", side=64, paths=100)
    with pytest.raises(ParameterError):
        diffusion.fclt_test("constant:1", epsilon_list=(0.1,), paths=100)


def test_displacement_homogeneous_tight():
    rep = diffusion.displacement_check("constant:1", paths=10_000, seed=3, tol=0.02)
    assert rep.passed
    assert rep.value("window_start") >= rep.value("good_radius") ** 2


def test_displacement_gating_excludes_short_times():
    f = make_field("pareto:2", 2, 128, seed=1)
    grid = (1, 2, 4, 8, 16, 32, 48, 64)
    rep = diffusion.displacement_check(f, t_grid=grid, paths=200, seed=1, lam=1.7, n_max=12)
    rho = rep.value("good_radius")
    assert rho > 1
    assert rep.value("window_start") == min(t for t in grid if t >= rho**2)
    # no good radius up to n_max: the window is empty and the suite refuses to fit
    with pytest.raises(ConfigurationError):
        diffusion.displacement_check(f, t_grid=grid, paths=200, seed=1, lam=1.0, n_max=12)


def test_exit_tail_homogeneous_anchor():
    a = diffusion.exit_tail_check("constant:1", paths=20_000, seed=0)
    b = diffusion.exit_tail_check("constant:1", paths=20_000, seed=5)
    assert a.passed and b.passed
    assert 0.5 <= a.value("slope") / b.value("slope") <= 2.0


def test_exit_tail_scaling_collapse():
    rep = diffusion.exit_tail_check("constant:1", R_list=(12, 24), ratios=(3, 4), paths=20_000, seed=1)
    p1 = rep.statistics["P(R=12,ratio=3)"]
    p2 = rep.statistics["P(R=24,ratio=3)"]
    assert abs(p1["value"] - p2["value"]) <= 3 * np.hypot(p1["se"], p2["se"])


def test_coupling_check_passes():
    rep = diffusion.coupling_check("pareto:2", n_paths=200, seed=1)
    assert rep.passed


def test_trap_control_and_vsrw_bounded():
    rep = diffusion.trap_demo((1,), paths=4000, seed=0)
    assert rep.passed
    full = diffusion.trap_demo((1, 10, 100, 1000, 10_000), paths=2000, seed=1)
    assert full.verdicts["vsrw_bounded"]
