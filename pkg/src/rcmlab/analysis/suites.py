"""Named suites with default configurations, as run by ``rcmlab verify``."""
from __future__ import annotations

import math

import numpy as np

from .. import corrector, metric, rng
from ..environment import ConductanceLaw, LatticeSpec, generate
from ..errors import ParameterError
from . import diffusion, harnack, kernels
from .report import VerificationReport


def _law(v) -> ConductanceLaw:
    return ConductanceLaw.parse(v) if isinstance(v, str) else v


def fpp_ball_ratio(law: ConductanceLaw, lattice: LatticeSpec, r: float, seed: int, c_a: float = 1.0) -> float:
    """``max{|y| : d~(0, y) < r} / r`` for one fresh environment."""
    field = generate(lattice, law, seed)
    x0 = lattice.center()
    d = metric.fpp_distances(field, x0, c_a).dist
    eucl = np.linalg.norm(lattice.displacement(np.asarray(x0), lattice.all_coords()), axis=1)
    return float(eucl[d < r].max() / r)


def shrinkage_check(law="pareto:2", d: int = 2, r_list=(4, 8, 16), lam: float | None = None, trials: int = 200,
                    seed: int = 0, c_a: float = 1.0, pilot: int = 20, margin: float = 1.1) -> VerificationReport:
    """Inclusion probability of the first-passage ball in a Euclidean ball, as ``r`` grows.

    When ``lam`` is not given it is fitted: ``margin`` times the median of
    the extent ratio over ``pilot`` environments at the largest radius.
    """
    law = _law(law)
    r_list = sorted(int(r) for r in r_list)
    rep = VerificationReport("shrinkage", {"law": str(law), "d": d, "r_list": r_list, "lambda": lam,
                                           "trials": trials, "seed": seed, "c_a": c_a, "pilot": pilot})
    if lam is None:
        probe = LatticeSpec.cube(d, int(2 * math.ceil(4 * r_list[-1] * c_a)) + 3, "torus")
        ratios = [fpp_ball_ratio(law, probe, r_list[-1], rng.derive_seed(seed, 0xF17, i), c_a) for i in range(pilot)]
        lam = margin * float(np.median(ratios))
    rep.fitted_constants["lambda0"] = lam
    side = 2 * int(math.ceil(lam * r_list[-1])) + 5
    lat = LatticeSpec.cube(d, side, "torus")
    probs = []
    for r in r_list:
        p, se = metric.shrinkage_probability(law, lat, c_a, lam, r, trials, rng.derive_seed(seed, r))
        probs.append((p, se))
        rep.stat(f"r={r}.probability", p, se)
    ok = all(b[0] >= a[0] - 3 * math.hypot(a[1], b[1]) for a, b in zip(probs, probs[1:]))
    rep.verdict("nondecreasing_in_r", ok, "3 SE")
    rep.verdict("increases_overall", probs[-1][0] > probs[0][0] or probs[0][0] == 1.0)
    return rep


def _einstein(p):
    return diffusion.einstein_check(_law(p.get("law", "pareto:3")), p.get("d", 2), p.get("side", 64),
                                    p.get("paths", 10_000), p.get("seed", 0), p.get("n_seeds", 5),
                                    tuple(p.get("t_grid", (16, 32, 64, 128, 256))), p.get("rel_tol", 0.10))


def _anomalous(p):
    return diffusion.anomalous_check(p.get("alpha", 0.5), p.get("d", 2),
                                     tuple(p.get("t_grid", (10, 31.6, 100, 316, 1000))), p.get("paths", 800),
                                     p.get("seed", 0), p.get("side", 256), p.get("n_env", 4))


def _fclt(p):
    return diffusion.fclt_test(p.get("law", "constant:1"), p.get("d", 2),
                               tuple(p.get("epsilon_list", (0.2, 0.1, 0.05))), tuple(p.get("t_marks", (0.5, 1.0))),
                               p.get("paths", 10_000), p.get("seed", 0), p.get("side", 256))


def _llt(p):
    return kernels.llt_check(p.get("law", "constant:1"), p.get("d", 2), tuple(p.get("n_list", (25, 100, 400))),
                             p.get("t", 1.0), p.get("x_grid"), p.get("seed", 0), p.get("side"),
                             p.get("sigma2"), p.get("tol", 1e-9))


def _exit_tail(p):
    return diffusion.exit_tail_check(p.get("law", "constant:1"), p.get("d", 2), tuple(p.get("R_list", (12, 16, 24))),
                                     tuple(p.get("ratios", (2, 3, 4, 6, 8, 10, 12))), p.get("paths", 20_000),
                                     p.get("seed", 0), p.get("side", 128))


def _displacement(p):
    return diffusion.displacement_check(p.get("law", "constant:1"), p.get("d", 2),
                                        tuple(p.get("t_grid", (4, 8, 16, 32, 64, 128, 256))),
                                        p.get("paths", 10_000), p.get("seed", 0), p.get("side", 256),
                                        p.get("lam", 2.0))


def _green(p):
    return kernels.green_asymptotics(p.get("law", "constant:1"), p.get("d", 3), p.get("box", 48),
                                     tuple(p.get("radii", (8, 16))), p.get("seed", 0), p.get("sigma2"))


def _ball_field(p):
    law = _law(p.get("law", "constant:1"))
    R = max(p.get("R_list", (8, 16, 32)))
    side = p.get("side", 2 * R + 16)
    return generate(LatticeSpec.cube(p.get("d", 2), side, "torus"), law, p.get("seed", 0))


def _harnack(p):
    f = _ball_field(p)
    return harnack.harnack_check(f, f.lattice.center(), tuple(p.get("R_list", (8, 16, 32))),
                                 p.get("mode", "elliptic"))


def _poincare(p):
    f = _ball_field(p)
    return harnack.poincare_check(f, f.lattice.center(), tuple(p.get("R_list", (8, 16, 32))),
                                  p.get("test_functions", 20), p.get("seed", 0))


def _trap(p):
    K = p.get("K_list", (1, 10, 100, 1000, 10_000))
    K = (K,) if np.isscalar(K) else tuple(K)
    return diffusion.trap_demo(K, p.get("d", 2), p.get("paths", 4000), p.get("seed", 0), p.get("side", 16))


def _envelope(p):
    return kernels.envelope_suite(p.get("law", "pareto:2"), p.get("d", 2), p.get("side", 48),
                                  tuple(p.get("times", (1, 2, 4, 8, 16, 32, 64))), p.get("seeds", 5),
                                  p.get("seed", 0), p.get("eta", 0.5))


def _nash(p):
    return kernels.nash_check(p.get("law", "constant:1"), p.get("d", 2), p.get("side", 128),
                              tuple(p.get("times", (4, 8, 16, 32, 64))), p.get("seed", 0))


def _sublinearity(p):
    return corrector.sublinearity_scan(p.get("law", "pareto:2"), tuple(p.get("sizes", (16, 32, 64))),
                                       p.get("seed", 0), p.get("seeds", 20), p.get("d", 2))


def _shrinkage(p):
    return shrinkage_check(p.get("law", "pareto:2"), p.get("d", 2), tuple(p.get("r_list", (4, 8, 16))),
                           p.get("lam"), p.get("trials", 200), p.get("seed", 0))


def _coupling(p):
    return diffusion.coupling_check(p.get("law", "pareto:2"), p.get("d", 2), p.get("n_paths", 400),
                                    p.get("t_max", 10.0), p.get("seed", 0), p.get("side", 16))


SUITES = {
    "einstein": _einstein,
    "anomalous": _anomalous,
    "fclt": _fclt,
    "llt": _llt,
    "exit_tail": _exit_tail,
    "displacement": _displacement,
    "green": _green,
    "harnack": _harnack,
    "poincare": _poincare,
    "trap": _trap,
    "envelope": _envelope,
    "nash": _nash,
    "sublinearity": _sublinearity,
    "shrinkage": _shrinkage,
    "coupling": _coupling,
}


def run(name: str, params: dict | None = None) -> VerificationReport:
    """Run the suite ``name`` with ``params`` overriding its defaults."""
    if name not in SUITES:
        raise ParameterError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    rep = SUITES[name](dict(params or {}))
    rep.inputs = {**rep.inputs, "overrides": dict(sorted((params or {}).items()))}
    return rep


__all__ = ["SUITES", "run", "shrinkage_check", "fpp_ball_ratio"]
