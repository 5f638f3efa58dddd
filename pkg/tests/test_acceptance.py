"""Acceptance gate: the fifteen criteria at their stated tolerances.

Each test records one PASS/FAIL line (shown in the terminal summary) and
then asserts the criterion literally.
"""
from __future__ import annotations

import math

import numpy as np

from rcmlab import corrector, heatkernel, metric, walk
from rcmlab.analysis import diffusion, harnack, kernels, suites
from rcmlab.environment import ConductanceField, ConductanceLaw, LatticeSpec

from conftest import make_field, record_criterion
from oracles import brute_force_fpp

ACCEPTANCE_LAWS = ("constant:1", "pareto:2", "pareto:3", "pareto:0.5")


def test_c01_homogeneous_diffusivity():
    f = make_field("constant:1", 2, 64)
    s2 = corrector.sigma2_from_corrector(corrector.solve_corrector(f)).sigma2
    exact_ok = all(abs(s - 2.0) <= 1e-8 for s in s2)
    msd = diffusion.msd_slope(f, walk.VSRW, [4, 8, 16, 32, 64], 10_000, seed=1)
    msd_ok = all(abs(s / 2.0 - 1) <= 0.05 for s in msd.sigma2)
    ok = exact_ok and msd_ok
    record_criterion(1, "homogeneous diffusivity", ok,
                     f"corrector {s2}, msd {tuple(round(s, 4) for s in msd.sigma2)}")
    assert ok


def test_c02_one_dimensional_cell_problem():
    mu = np.where(np.arange(16) % 2 == 0, 1.0, 3.0)
    f = ConductanceField(LatticeSpec(1, (16,), "torus"), mu, ConductanceLaw.explicit(mu))
    s2 = corrector.sigma2_from_corrector(corrector.solve_corrector(f)).sigma2[0]
    ok = abs(s2 - 3.0) <= 1e-6
    record_criterion(2, "1-d cell problem", ok, f"sigma2 = {s2:.12f}")
    assert ok


def test_c03_einstein_relation():
    rep = suites.run("einstein", {})
    errs = [rep.value(f"seed{k}.relative_error") for k in range(5)]
    ok = all(abs(e) <= 0.10 for e in errs)
    record_criterion(3, "Einstein relation pareto(3)", ok, "relative errors " + ", ".join(f"{e:+.4f}" for e in errs))
    assert ok


def test_c04_degenerate_csrw():
    rep = suites.run("anomalous", {})
    bc, bv = rep.value("CSRW.exponent"), rep.value("VSRW.exponent")
    ok = bc <= 0.9 and abs(bv - 1) <= 0.1
    record_criterion(4, "degenerate CSRW pareto(0.5)", ok, f"CSRW {bc:.3f}, VSRW {bv:.3f}")
    assert ok


def test_c05_conservation():
    worst, min_scale = 0.0, 1.0
    for law in ACCEPTANCE_LAWS:
        for seed in range(3):
            f = make_field(law, 2, 16, seed=seed)
            # stiff heavy-tailed fields: shrink the time grid to fit the step budget
            scale = min(1.0, 1e6 / (2.0 * float(np.max(f.mu_x))))
            min_scale = min(min_scale, scale)
            k = heatkernel.solve_kernel(f, 0, [0.25 * scale, scale, 2.0 * scale], tol=1e-9)
            worst = max(worst, float(np.max(np.abs(k.values.sum(axis=1) - 1))))
    ok = worst <= 1e-9
    record_criterion(5, "kernel conservation", ok,
                     f"max |mass - 1| = {worst:.2e}, smallest time scale {min_scale:.2e}")
    assert ok


def test_c06_kernel_cross_validation():
    fracs = []
    for law in ("constant:1", "pareto:2"):
        f = make_field(law, 2, 8, seed=1)
        q = heatkernel.solve_kernel(f, 0, [2.0]).values[0]
        est, se = heatkernel.mc_kernel(f, 0, 2.0, paths=100_000, seed=2)
        fracs.append(float(np.mean(np.abs(est - q) <= 3 * se)))
    ok = all(fr >= 0.95 for fr in fracs)
    record_criterion(6, "kernel cross-validation", ok, f"fraction within 3 SE {fracs}")
    assert ok


def test_c07_nash_and_displacement_scaling():
    parts = []
    ok = True
    for law in ("constant:1", "pareto:2"):
        nash = suites.run("nash", {"law": law})
        disp = suites.run("displacement", {"law": law})
        m, g = nash.value("M_exponent"), disp.value("graph.exponent")
        ok &= abs(m - 0.5) <= 0.05 and abs(g - 0.5) <= 0.05
        parts.append(f"{law}: M {m:.3f}, E d {g:.3f}")
    record_criterion(7, "Nash/displacement scaling", ok, "; ".join(parts))
    assert ok


def test_c08_exit_tails():
    r2 = {law: suites.run("exit_tail", {"law": law}).value("r2") for law in ("constant:1", "pareto:2")}
    ok = all(v >= 0.9 for v in r2.values())
    record_criterion(8, "exit tails", ok, ", ".join(f"{k} R^2 {v:.3f}" for k, v in r2.items()))
    assert ok


def test_c09_local_limit_theorem():
    parts = []
    ok = True
    for law in ("constant:1", "pareto:2"):
        rep = suites.run("llt", {"law": law})
        errs = [rep.value(f"e(n={n})") for n in (25, 100, 400)]
        k0 = rep.value("k_t(0)")
        ok &= all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] <= 0.1 * k0
        parts.append(f"{law}: e = " + ", ".join(f"{e:.2e}" for e in errs) + f" vs 0.1 k_t(0) = {0.1 * k0:.2e}")
    record_criterion(9, "local limit theorem", ok, "; ".join(parts))
    assert ok


def test_c10_green_constant():
    rep = suites.run("green", {})
    C = rep.value("C_target")
    means = [rep.value(f"shell[{k}].mean") for k in range(8, 16)]
    worst = max(abs(m / C - 1) for m in means)
    ok = worst <= 0.10
    record_criterion(10, "Green constant", ok,
                     f"shell means {min(means):.4f}..{max(means):.4f} vs C {C:.5f}, max deviation {worst:.1%}; "
                     f"offset fit C {rep.fitted_constants['C_offset_fit']:.5f}")
    assert ok


def test_c11_fpp_exactness():
    mismatches = 0
    side = 4
    for seed in range(100):
        f = make_field("pareto:1", 2, side, "free", seed=seed)
        w = metric.edge_times(f)
        weights = {tuple(sorted(int(v) for v in ab)): w[k] for k, ab in enumerate(f.lattice.edge_ends)}
        for src in range(f.n_sites):
            if not np.array_equal(metric.fpp_distances(f, src).dist, brute_force_fpp(side, weights, src)):
                mismatches += 1
    ok = mismatches == 0
    record_criterion(11, "FPP exactness", ok, f"{mismatches} mismatches over 100 fields x 16 sources")
    assert ok


def test_c12_time_change_coupling():
    rep = suites.run("coupling", {})
    ok = (rep.verdicts["jump_chains_identical"] and rep.value("n_holds") >= 10_000
          and rep.value("ks_p") >= 0.01)
    record_criterion(12, "time-change coupling", ok,
                     f"{rep.value('identical_jump_chains')} identical chains, {rep.value('n_holds')} holds, "
                     f"KS p {rep.value('ks_p'):.3f}")
    assert ok


def test_c13_martingale_property():
    f = make_field("pareto:2", 2, 64, seed=13)
    x0 = (32, 32)
    corr = corrector.solve_corrector(f)
    good = corrector.martingale_check(f, corr, x0, [1, 4, 16], paths=20_000, seed=3)
    control = corrector.martingale_check(f, corrector.zero_corrector(f), x0, [1, 4, 16], paths=20_000, seed=3)
    ok = good.passed and not control.passed
    record_criterion(13, "martingale property", ok,
                     f"corrected {sum(good.verdicts.values())}/{len(good.verdicts)} pass, "
                     f"zeroed control {sum(control.verdicts.values())}/{len(control.verdicts)} pass")
    assert ok


def test_c14_trap_law():
    rep = suites.run("trap", {})
    e, spread = rep.value("csrw_exponent"), rep.value("vsrw_spread")
    ok = abs(e - 1) <= 0.15 and spread < 2
    record_criterion(14, "trap law", ok, f"CSRW exponent {e:.3f}, VSRW spread {spread:.3f}")
    assert ok


def test_c15_harnack_poincare_stability():
    parts = []
    ok = True
    for law in ("constant:1", "pareto:2"):
        h = suites.run("harnack", {"law": law})
        p = suites.run("poincare", {"law": law})
        sh, sp = h.value("spread"), p.value("spread")
        ok &= sh < 2 and sp < 2 and all(map(math.isfinite, h.fitted_constants["C_H"]))
        parts.append(f"{law}: C_H spread {sh:.2f}, Poincare spread {sp:.2f}")
    record_criterion(15, "Harnack/Poincare stability", ok, "; ".join(parts))
    assert ok
