"""Walk-based suites: diffusivity, the Einstein relation, scaling and trapping."""
from __future__ import annotations

import math

import numpy as np

from .. import corrector, metric, rng, walk
from ..environment import ConductanceField, ConductanceLaw, LatticeSpec, empirical_mean_mu, generate
from ..errors import ConfigurationError, ParameterError, TruncationError
from . import stats as st
from .report import VerificationReport


def as_field(source, d: int = 2, side: int = 64, seed: int = 0, boundary: str = "torus") -> ConductanceField:
    """Pass a field through, or generate one from a law (or law string)."""
    if isinstance(source, ConductanceField):
        return source
    law = ConductanceLaw.parse(source) if isinstance(source, str) else source
    return generate(LatticeSpec.cube(d, side, boundary), law, seed)


def stationary_starts(field: ConductanceField, kind: str, n: int, seed: int) -> np.ndarray:
    """Start sites drawn from the walk's invariant law: uniform (VSRW) or prop. to mu_x (CSRW)."""
    gen = rng.generator(seed, 0x57A)
    if kind.upper() == walk.VSRW:
        return gen.integers(0, field.n_sites, n).astype(np.int64)
    w = np.asarray(field.mu_x)
    return gen.choice(field.n_sites, size=n, p=w / w.sum()).astype(np.int64)


def _per_coord_slopes(sq: np.ndarray, times: np.ndarray) -> np.ndarray:
    m = sq.mean(axis=0)  # (T, d)
    return np.array([st.linear_fit(times, m[:, j]).slope for j in range(m.shape[1])])


def msd_slope(source, kind: str, t_grid, paths: int, seed: int, *, d: int = 2, side: int = 64,
              starts=None, n_boot: int = 200) -> corrector.DiffusivityEstimate:
    """Per-coordinate slope of ``E[(X_t - X_0)_j^2]`` against ``t`` with bootstrap SE.

    Without explicit ``starts`` the paths begin from the invariant law of
    the walk, which removes the start-dependent transient from the fit.
    """
    field = as_field(source, d, side, seed)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if paths < 1:
        raise ParameterError("paths must be >= 1")
    if len(t_grid) < 2:
        raise ParameterError("t_grid needs at least two times")
    if starts is None:
        starts = stationary_starts(field, kind, paths, seed)
    batch = walk.observe(field, kind, starts, t_grid, rng.derive_seed(seed, 0x3D))
    sq = batch.disp.astype(np.float64) ** 2
    slopes = _per_coord_slopes(sq, t_grid)
    ses = [st.bootstrap_se(sq, lambda s, j=j: _per_coord_slopes(s[:, :, j:j + 1], t_grid)[0],
                           n_boot=n_boot, seed=seed) for j in range(field.dim)]
    return corrector.DiffusivityEstimate(tuple(float(s) for s in slopes), "msd_slope", tuple(ses))


def _iso(est: corrector.DiffusivityEstimate) -> tuple[float, float]:
    se = np.asarray(est.se, dtype=np.float64)
    return est.isotropic, float(np.sqrt(np.sum(se**2)) / len(se))


def einstein_check(law, d: int = 2, side: int = 64, paths: int = 10_000, seed: int = 0,
                   n_seeds: int = 5, t_grid=(16, 32, 64, 128, 256), rel_tol: float = 0.10) -> VerificationReport:
    """Compare the CSRW diffusivity with ``sigma_V^2 / (2 d mean(mu))`` per quenched environment."""
    law = ConductanceLaw.parse(law) if isinstance(law, str) else law
    if not math.isfinite(law.mean):
        raise ConfigurationError(f"{law} has infinite mean; use anomalous_check instead")
    rep = VerificationReport("einstein", {"law": str(law), "d": d, "side": side, "paths": paths,
                                          "seed": seed, "n_seeds": n_seeds, "t_grid": list(t_grid)})
    for i in range(n_seeds):
        s = rng.derive_seed(seed, i)
        field = as_field(law, d, side, s)
        sv, sv_se = _iso(msd_slope(field, walk.VSRW, t_grid, paths, rng.derive_seed(s, 1)))
        sc, sc_se = _iso(msd_slope(field, walk.CSRW, t_grid, paths, rng.derive_seed(s, 2)))
        mbar = empirical_mean_mu(field)
        pred = sv / (2 * d * mbar)
        pred_se = sv_se / (2 * d * mbar)
        rel = sc / pred - 1.0
        rel_se = math.hypot(sc_se / pred, sc * pred_se / pred**2)
        rep.stat(f"seed{i}.sigma2_V", sv, sv_se)
        rep.stat(f"seed{i}.sigma2_C", sc, sc_se)
        rep.stat(f"seed{i}.mean_mu", mbar)
        rep.stat(f"seed{i}.relative_error", rel, rel_se)
        tol = max(rel_tol, 3 * rel_se)
        rep.verdict(f"seed{i}", abs(rel) <= tol, tol)
    return rep


def msd_exponent(field: ConductanceField, kind: str, t_grid, paths: int, seed: int) -> tuple[float, float]:
    """Log-log exponent of the mean squared displacement, with bootstrap SE."""
    t_grid = np.asarray(t_grid, dtype=np.float64)
    starts = stationary_starts(field, walk.VSRW, paths, seed)
    batch = walk.observe(field, kind, starts, t_grid, rng.derive_seed(seed, 0xA0))
    r2 = np.sum(batch.disp.astype(np.float64) ** 2, axis=2)

    def expo(s):
        return st.loglog_fit(t_grid, s.mean(axis=0)).slope

    return float(expo(r2)), st.bootstrap_se(r2, expo, seed=seed)


def anomalous_check(alpha: float = 0.5, d: int = 2, t_grid=(10, 31.6, 100, 316, 1000), paths: int = 2000,
                    seed: int = 0, side: int = 256, n_env: int = 4, beta_max: float = 0.9,
                    vsrw_tol: float = 0.1) -> VerificationReport:
    """MSD exponents of the CSRW and VSRW on heavy-tailed environments.

    Paths start uniformly (the VSRW invariant law) on every environment, so
    both walks are compared on identical environments and starting sites.
    """
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    law = ConductanceLaw.pareto(alpha)
    rep = VerificationReport("anomalous", {"law": str(law), "d": d, "side": side, "paths": paths, "seed": seed,
                                           "n_env": n_env, "t_grid": list(t_grid)})
    t_grid = np.asarray(t_grid, dtype=np.float64)
    per = max(paths // n_env, 1)
    msd = {walk.VSRW: [], walk.CSRW: []}
    for i in range(n_env):
        field = as_field(law, d, side, rng.derive_seed(seed, i))
        starts = stationary_starts(field, walk.VSRW, per, rng.derive_seed(seed, i, 7))
        for kind in msd:
            b = walk.observe(field, kind, starts, t_grid, rng.derive_seed(seed, i, 1 if kind == walk.VSRW else 2))
            msd[kind].append(np.sum(b.disp.astype(np.float64) ** 2, axis=2))
    out = {}
    for kind, blocks in msd.items():
        r2 = np.concatenate(blocks)

        def expo(s):
            return st.loglog_fit(t_grid, s.mean(axis=0)).slope

        out[kind] = (expo(r2), st.bootstrap_se(r2, expo, seed=seed))
        rep.stat(f"{kind}.exponent", *out[kind])
    rep.fitted_constants["beta_CSRW"] = out[walk.CSRW][0]
    rep.fitted_constants["beta_VSRW"] = out[walk.VSRW][0]
    if math.isfinite(law.mean):
        rep.verdict("csrw_diffusive", abs(out[walk.CSRW][0] - 1) <= vsrw_tol, vsrw_tol)
    else:
        rep.verdict("csrw_subdiffusive", out[walk.CSRW][0] <= beta_max, beta_max)
    rep.verdict("vsrw_diffusive", abs(out[walk.VSRW][0] - 1) <= vsrw_tol, vsrw_tol)
    return rep


def fclt_test(source, d: int = 2, epsilon_list=(0.2, 0.1, 0.05), t_marks=(0.5, 1.0), paths: int = 10_000,
              seed: int = 0, side: int = 256, level: float = 0.01, drift: float = 0.5) -> VerificationReport:
    """Rescaled marginals ``eps X_{t/eps^2}`` against N(0, sigma^2 t I) on one quenched environment.

    For the normality test lattice positions are spread uniformly over
    their unit cell, so the comparison is with a continuous law; the added
    variance ``eps^2/12`` is negligible at the tested scales.  The
    improvement check uses the raw lattice values, whose KS distance carries
    the discreteness and environment effects that vanish as ``eps -> 0``.
    A post hoc drift of ``drift * sigma * t`` is the negative control that
    normality must reject.
    """
    if len(epsilon_list) < 2:
        raise ParameterError("need at least two values of epsilon")
    field = as_field(source, d, side, seed)
    if field.lattice.boundary == "torus":
        sig = corrector.sigma2_from_corrector(corrector.solve_corrector(field))
    else:
        sig = msd_slope(field, walk.VSRW, [16, 64, 256], paths, rng.derive_seed(seed, 3))
    sigma2 = np.asarray(sig.sigma2)
    eps_sorted = sorted(epsilon_list, reverse=True)
    t_marks = np.asarray(sorted(t_marks), dtype=np.float64)
    half = min(field.lattice.sides) / 2
    need = 3 * math.sqrt(float(sigma2.max()) * t_marks[-1]) / eps_sorted[-1]
    if need > half:
        raise TruncationError(f"box half-width {half:g} is below the displacement scale {need:.1f}")
    rep = VerificationReport("fclt", {"field": str(field.law), "d": field.dim, "side": field.lattice.sides,
                                      "seed": seed, "epsilon_list": eps_sorted, "t_marks": t_marks.tolist(),
                                      "paths": paths, "level": level})
    for j, s in enumerate(sigma2):
        rep.stat(f"sigma2_{j + 1}", float(s))
    n_tests = len(t_marks) * field.dim
    alpha = level / n_tests
    ks_by_eps = []
    start = field.lattice.index(field.lattice.center())
    gen = rng.generator(seed, 0xF1)
    for eps in eps_sorted:
        times = t_marks / eps**2
        b = walk.observe(field, walk.VSRW, start, times, rng.derive_seed(seed, 0xF2, int(round(1 / eps * 1000))),
                         n_paths=paths)
        raw = b.disp * eps
        y = (b.disp + gen.uniform(-0.5, 0.5, b.disp.shape)) * eps
        worst_d, worst_p, worst_p_drift = 0.0, 1.0, 1.0
        for k, t in enumerate(t_marks):
            for j in range(field.dim):
                _, p = st.ks_normal(y[:, k, j], sigma2[j] * t)
                worst_p = min(worst_p, p)
                worst_d = max(worst_d, st.ks_normal(raw[:, k, j], sigma2[j] * t)[0])
                _, pd = st.ks_normal(y[:, k, j] + drift * math.sqrt(sigma2[j]) * t, sigma2[j] * t)
                worst_p_drift = min(worst_p_drift, pd)
        ks_by_eps.append(worst_d)
        tag = f"eps={eps:g}"
        rep.stat(f"{tag}.ks_max_distance", worst_d)
        rep.stat(f"{tag}.ks_min_p", worst_p)
        rep.stat(f"{tag}.drift_control_min_p", worst_p_drift)
        last = y[:, -1, :]
        corr_ok = True
        for a in range(field.dim):
            for c in range(a + 1, field.dim):
                r, se = st.correlation_se(last[:, a], last[:, c])
                rep.stat(f"{tag}.corr_{a + 1}{c + 1}", r, se)
                corr_ok &= abs(r) <= 3 * se
        inc_ok = True
        if len(t_marks) >= 2:
            for j in range(field.dim):
                r, se = st.correlation_se(y[:, 0, j], y[:, -1, j] - y[:, 0, j])
                rep.stat(f"{tag}.increment_corr_{j + 1}", r, se)
                inc_ok &= abs(r) <= 3 * se
        if eps == eps_sorted[-1]:
            rep.verdict("normality_at_smallest_eps", worst_p >= alpha, alpha)
            rep.verdict("coordinates_uncorrelated", corr_ok, "3 SE")
            rep.verdict("increments_uncorrelated", inc_ok, "3 SE")
            rep.verdict("drift_control_rejected", worst_p_drift < alpha, alpha)
    rep.verdict("ks_improves", ks_by_eps[-1] <= ks_by_eps[0])
    return rep


def displacement_check(source, d: int = 2, t_grid=(4, 8, 16, 32, 64, 128, 256), paths: int = 10_000,
                       seed: int = 0, side: int = 256, lam: float = 2.0, c_a: float = 1.0, tol: float = 0.05,
                       n_max: int = 32) -> VerificationReport:
    """Exponents of ``E d(0, X_t)`` and ``E d~(0, X_t)`` in ``t`` on the gated window ``t >= r_good^2``."""
    field = as_field(source, d, side, seed)
    lat = field.lattice
    x0 = lat.index(lat.center())
    t_grid = np.asarray(sorted(t_grid), dtype=np.float64)
    # the arithmetic mean bounds the effective diffusivity from above
    sd = math.sqrt(2.0 * empirical_mean_mu(field) * t_grid[-1])
    if lat.boundary == "torus" and 3 * sd > min(lat.sides) / 2:
        raise TruncationError("torus too small for the largest time in t_grid")
    rho = metric.good_radius(field, x0, lam, min(n_max, metric._max_inbox_radius(lat, x0)), c_a)
    rho = rho if rho is not None else n_max
    window = t_grid[t_grid >= rho**2]
    rep = VerificationReport("displacement", {"field": str(field.law), "d": field.dim, "side": lat.sides,
                                              "seed": seed, "t_grid": t_grid.tolist(), "paths": paths,
                                              "lambda": lam, "c_a": c_a})
    rep.stat("good_radius", rho)
    if len(window) < 3:
        raise ConfigurationError(f"gated window t >= {rho ** 2} keeps fewer than three times")
    b = walk.observe(field, walk.VSRW, x0, window, rng.derive_seed(seed, 0xD1), n_paths=paths)
    dg = metric.graph_distance(lat, x0)[b.sites].astype(np.float64)
    df = metric.fpp_distances(field, x0, c_a).dist[b.sites]
    for name, vals in (("graph", dg), ("fpp", df)):

        def expo(s):
            return st.loglog_fit(window, s.mean(axis=0)).slope

        e, se = expo(vals), st.bootstrap_se(vals, expo, seed=seed)
        rep.stat(f"{name}.exponent", e, se)
        rep.fitted_constants[f"{name}.c_upper"] = float(np.max(vals.mean(axis=0) / np.sqrt(window)))
        rep.fitted_constants[f"{name}.c_lower"] = float(np.min(vals.mean(axis=0) / np.sqrt(window)))
        rep.verdict(f"{name}_exponent_half", abs(e - 0.5) <= tol, tol)
    rep.stat("window_start", float(window[0]))
    return rep


def exit_tail_check(source, d: int = 2, R_list=(12, 16, 24), ratios=(2, 3, 4, 6, 8, 10, 12),
                    paths: int = 20_000, seed: int = 0, side: int = 128, r2_min: float = 0.9) -> VerificationReport:
    """Regress ``-log P(tau(0, R) < t)`` on ``R^2/t`` over a grid of exit radii and times.

    Times are ``t = R^2 / ratio`` so every cell has ``R^2/t`` in the stated
    range; cells with no exits are dropped and counted.
    """
    field = as_field(source, d, side, seed)
    lat = field.lattice
    R_list = sorted(int(r) for r in R_list)
    if 2 * R_list[-1] >= min(lat.sides):
        raise TruncationError("torus too small: graph distance and l1 displacement would differ")
    x0 = lat.index(lat.center())
    t_max = R_list[-1] ** 2 / min(ratios)
    fp = walk.first_passage(field, walk.VSRW, x0, t_max, R_list[-1], rng.derive_seed(seed, 0xE7), n_paths=paths)
    rep = VerificationReport("exit_tail", {"field": str(field.law), "d": field.dim, "side": lat.sides,
                                           "seed": seed, "R_list": R_list, "ratios": list(ratios), "paths": paths})
    xs, ys, dropped = [], [], 0
    for R in R_list:
        for a in ratios:
            t = R * R / a
            p = float(np.mean(fp[:, R] < t))
            se = math.sqrt(p * (1 - p) / paths)
            rep.stat(f"P(R={R},ratio={a:g})", p, se)
            if p == 0.0:
                dropped += 1
                continue
            xs.append(a)
            ys.append(-math.log(p))
    rep.stat("dropped_cells", dropped)
    fit = st.linear_fit(xs, ys)
    rep.stat("slope", fit.slope, fit.slope_se)
    rep.stat("r2", fit.r2)
    rep.fitted_constants["c4"] = fit.slope
    rep.fitted_constants["c3"] = math.exp(-fit.intercept) if math.isfinite(fit.intercept) else math.nan
    rep.verdict("linear_fit", fit.r2 >= r2_min, r2_min)
    rep.verdict("positive_slope", fit.slope > 0)
    return rep


def coupling_check(source, d: int = 2, n_paths: int = 400, t_max: float = 10.0, seed: int = 0, side: int = 16,
                   level: float = 0.01, min_holds: int = 10_000) -> VerificationReport:
    """Path-level time change: same jump chains and Exp(1) holds after rescaling.

    The final hold of each path straddles the horizon and is length-biased,
    so it is excluded from the KS sample.
    """
    field = as_field(source, d, side, seed)
    rep = VerificationReport("coupling", {"field": str(field.law), "d": field.dim, "side": field.lattice.sides,
                                          "seed": seed, "n_paths": n_paths, "t_max": t_max})
    same = 0
    holds = []
    max_dev = 0.0
    for i in range(n_paths):
        s = rng.derive_seed(seed, i)
        v = walk.simulate(field, walk.VSRW, field.lattice.center(), t_max, s)
        c = walk.time_change(v, field)
        direct = walk.simulate(field, walk.CSRW, field.lattice.center(), c.t_end, s)
        n = min(len(direct.sites), len(c.sites))
        if np.array_equal(direct.sites[:n], c.sites[:n]) and abs(len(direct.sites) - len(c.sites)) <= 1:
            same += 1
        max_dev = max(max_dev, float(np.max(np.abs(direct.holds[:n] - c.holds[:n]))))
        holds.append(c.holds[:-1])
    pooled = np.concatenate(holds)
    D, p = st.ks_exponential(pooled)
    rep.stat("identical_jump_chains", same)
    rep.stat("max_hold_deviation", max_dev)
    rep.stat("n_holds", len(pooled))
    rep.stat("ks_distance", D)
    rep.stat("ks_p", p)
    rep.verdict("jump_chains_identical", same == n_paths)
    rep.verdict("enough_holds", len(pooled) >= min_holds, min_holds)
    rep.verdict("holds_exp1", p >= level, level)
    return rep


def trap_region(field: ConductanceField, a: int, b: int, radius: int) -> np.ndarray:
    """Sites within graph distance < ``radius`` of either endpoint."""
    lat = field.lattice
    return (metric.graph_distance(lat, a) < radius) | (metric.graph_distance(lat, b) < radius)


def trap_demo(K_list=(1, 10, 100, 1000, 10_000), d: int = 2, paths: int = 4000, seed: int = 0, side: int = 16,
              radius: int = 3, exp_tol: float = 0.15) -> VerificationReport:
    """Occupation of a planted heavy edge before leaving ``B(edge, radius)``.

    The CSRW sits on the trap for a time of order ``K``; the VSRW crosses it
    ``K`` times as fast, so its occupation stays bounded.  With ``K = 1`` the
    two walks share the jump chain law and the CSRW occupation is exactly
    ``2d`` times the VSRW one in expectation.
    """
    K_list = sorted(float(k) for k in K_list)
    lat = LatticeSpec.cube(d, side, "torus")
    base = generate(lat, ConductanceLaw.constant(1.0), seed)
    a = lat.index(lat.center())
    bsite = int(lat.nbr[a, 1])
    e = base.edge_between(a, bsite)
    rep = VerificationReport("trap", {"K_list": K_list, "d": d, "paths": paths, "seed": seed, "side": side,
                                      "radius": radius})
    means = {walk.VSRW: [], walk.CSRW: []}
    for K in K_list:
        field = base.planted({e: K})
        region = trap_region(field, a, bsite, radius)
        marked = np.zeros(lat.n_sites, dtype=bool)
        marked[[a, bsite]] = True
        for kind, key in ((walk.VSRW, 1), (walk.CSRW, 2)):
            occ, ext = walk.occupation_before_exit(field, kind, a, region, marked, 1e15,
                                                   rng.derive_seed(seed, key, int(K)), n_paths=paths)
            m, se = st.mean_se(occ)
            means[kind].append((float(m), float(se)))
            rep.stat(f"{kind}.K={K:g}", float(m), float(se))
    vs = np.array([m for m, _ in means[walk.VSRW]])
    cs = np.array([m for m, _ in means[walk.CSRW]])
    heavy = np.array(K_list) >= 10
    if heavy.sum() >= 2:
        fit = st.loglog_fit(np.array(K_list)[heavy], cs[heavy])
        rep.stat("csrw_exponent", fit.slope, fit.slope_se)
        rep.fitted_constants["csrw_exponent"] = fit.slope
        rep.verdict("csrw_linear_in_K", abs(fit.slope - 1) <= exp_tol, exp_tol)
        spread = st.spread_ratio(vs[heavy])
        rep.stat("vsrw_spread", spread)
        rep.verdict("vsrw_bounded", spread < 2.0, 2.0)
    if 1.0 in K_list:
        i = K_list.index(1.0)
        (mv, sv), (mc, sc) = means[walk.VSRW][i], means[walk.CSRW][i]
        ratio_gap = mc - 2 * d * mv
        gap_se = math.hypot(sc, 2 * d * sv)
        rep.stat("control.csrw_minus_2d_vsrw", ratio_gap, gap_se)
        rep.verdict("control_no_trap", abs(ratio_gap) <= 3 * gap_se and mc < 50 and mv < 50, "3 SE")
    return rep
