"""Elliptic and parabolic Harnack ratios and the weighted Poincare ratio on balls."""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import splu

from .. import heatkernel, linalg, metric
from ..environment import ConductanceField
from ..errors import ParameterError, TruncationError
from ..rng import generator
from . import stats as st
from .report import VerificationReport


def _ball(field: ConductanceField, center, R: int):
    lat = field.lattice
    c = field._site(center)
    if R + 1 > metric._max_inbox_radius(lat, c):
        raise TruncationError(f"B({center}, {R}) and its boundary do not fit in the box")
    dist = metric.graph_distance(lat, c)
    return c, dist


def harmonic_measure(field: ConductanceField, center, R: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columns are the harmonic functions on ``B(center, R)`` with boundary data ``delta_z``.

    Returns ``(inside, boundary, H)`` where ``H[i, k]`` is the probability
    that the walk from ``inside[i]`` leaves the ball at ``boundary[k]``.
    """
    _, dist = _ball(field, center, R)
    inside = np.nonzero(dist < R)[0]
    boundary = np.nonzero(dist == R)[0]
    mask = dist < R
    A = (-linalg.generator(field, mask)).tocsc()
    lat = field.lattice
    pos = np.full(field.n_sites, -1, dtype=np.int64)
    pos[inside] = np.arange(len(inside))
    bpos = np.full(field.n_sites, -1, dtype=np.int64)
    bpos[boundary] = np.arange(len(boundary))
    rhs = np.zeros((len(inside), len(boundary)))
    a, b = lat.edge_ends[:, 0], lat.edge_ends[:, 1]
    for u, v in ((a, b), (b, a)):
        sel = (pos[u] >= 0) & (bpos[v] >= 0)
        np.add.at(rhs, (pos[u][sel], bpos[v][sel]), field.mu[sel])
    H = splu(A).solve(rhs)
    return inside, boundary, H


def elliptic_ratio(field: ConductanceField, center, R: int, data=None) -> float:
    """``max_z sup/inf`` over ``B(center, R/2)`` of the harmonic functions with data ``delta_z``.

    With ``data`` (boundary values, nonnegative) only that one function is used.
    """
    _, dist = _ball(field, center, R)
    inside, boundary, H = harmonic_measure(field, center, R)
    half = dist[inside] < R / 2
    if data is not None:
        data = np.asarray(data, dtype=np.float64)
        if np.any(data < 0):
            raise ParameterError("boundary data must be nonnegative")
        h = H @ data
        return float(h[half].max() / h[half].min())
    Hh = H[half]
    return float(np.max(Hh.max(axis=0) / Hh.min(axis=0)))


def parabolic_ratio(field: ConductanceField, center, R: int, sources=None, tol: float = 1e-8) -> float:
    """``sup_{Q-} u / inf_{Q+} u`` for caloric ``u(t, .) = q^D_t(z, .)``, ``D = B(center, 2R)``.

    ``T = R^2``; sources ``z`` default to the points of ``B(center, 2R)`` at
    distance ``R`` from the centre in the coordinate directions.
    """
    lat = field.lattice
    c, dist = _ball(field, center, 2 * R)
    domain = dist < 2 * R
    T = float(R * R)
    if sources is None:
        cc = lat.coords(c)
        sources = []
        for k in range(lat.dim):
            for s in (-1, 1):
                y = cc.copy()
                y[k] += s * R
                sources.append(lat.index(lat.wrap(y)))
    tm = np.linspace(T / 4, T / 2, 5)
    tp = np.linspace(3 * T / 4, T, 5)
    half = dist < R / 2
    worst = 1.0
    for z in sources:
        kern = heatkernel.solve_kernel(field, z, np.concatenate([tm, tp]), tol=tol, domain=domain)
        u = kern.values[:, half]
        worst = max(worst, float(u[:5].max() / u[5:].min()))
    return worst


# -- weighted Poincare ---------------------------------------------------------


def poincare_forms(field: ConductanceField, center, R: int):
    """Quadratic forms of both sides of the weighted Poincare inequality on ``B(center, R)``.

    ``phi(y) = R^2 (R ^ rho_B(y))^2`` with ``rho_B(y) = d(y, B^c)``; the
    variance side carries ``phi nu`` (``nu = 1``) and the energy side
    ``R^2 sum_{x,y in B} (f(x) - f(y))^2 (phi(x) ^ phi(y)) mu_xy`` over
    ordered pairs.  Returns ``(sites, V, E)`` with ``inf_a`` already
    taken in ``V``.
    """
    _, dist = _ball(field, center, R)
    sites = np.nonzero(dist < R)[0]
    rho = R - dist[sites]  # graph distance to the complement of the ball
    phi = float(R) ** 2 * np.minimum(R, rho).astype(np.float64) ** 2
    w = phi
    V = np.diag(w) - np.outer(w, w) / w.sum()
    pos = np.full(field.n_sites, -1, dtype=np.int64)
    pos[sites] = np.arange(len(sites))
    lat = field.lattice
    a, b = lat.edge_ends[:, 0], lat.edge_ends[:, 1]
    sel = (pos[a] >= 0) & (pos[b] >= 0)
    ia, ib = pos[a][sel], pos[b][sel]
    # ordered pairs: each undirected edge appears twice
    ew = 2.0 * np.minimum(phi[ia], phi[ib]) * field.mu[sel] * R**2
    E = np.zeros((len(sites), len(sites)))
    np.add.at(E, (ia, ia), ew)
    np.add.at(E, (ib, ib), ew)
    np.add.at(E, (ia, ib), -ew)
    np.add.at(E, (ib, ia), -ew)
    return sites, V, E


def poincare_ratio(V: np.ndarray, E: np.ndarray, f: np.ndarray) -> float:
    if np.ptp(f) == 0:
        return 0.0
    den = float(f @ E @ f)
    num = float(f @ V @ f)
    if den <= 0:
        return 0.0 if num <= 1e-300 else math.inf
    return num / den


def poincare_max_ratio(V: np.ndarray, E: np.ndarray) -> float:
    """Largest ``f'Vf / f'Ef`` over non-constant ``f`` (generalized eigenproblem)."""
    n = V.shape[0]
    # both forms kill constants; restrict to the orthogonal complement
    Q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))
    B = Q[:, 1:]
    vals = la.eigh(B.T @ V @ B, B.T @ E @ B, eigvals_only=True, subset_by_index=[n - 2, n - 2])
    return float(vals[-1])


def poincare_check(field: ConductanceField, center, R_list=(8, 16, 32), test_functions: int = 20, seed: int = 0,
                   stable_factor: float = 2.0) -> VerificationReport:
    """Random, coordinate and extremal test functions on each ball; stable max ratio across radii."""
    R_list = sorted(int(r) for r in R_list)
    rep = VerificationReport("poincare", {"field": str(field.law), "sides": field.lattice.sides,
                                          "center": list(np.atleast_1d(center)) if not isinstance(center, int)
                                          else center, "R_list": R_list, "test_functions": test_functions,
                                          "seed": seed})
    lat = field.lattice
    gen = generator(seed, 0x9C)
    maxima = []
    for R in R_list:
        sites, V, E = poincare_forms(field, center, R)
        coords = lat.displacement(lat.coords(field._site(center)), lat.coords(sites)).astype(np.float64)
        rnd = max(poincare_ratio(V, E, gen.standard_normal(len(sites))) for _ in range(test_functions))
        coord = max(poincare_ratio(V, E, coords[:, k]) for k in range(lat.dim))
        top = poincare_max_ratio(V, E)
        rep.stat(f"R={R}.random_max", rnd)
        rep.stat(f"R={R}.coordinate", coord)
        rep.stat(f"R={R}.max_ratio", top)
        rep.verdict(f"R={R}.extremal_dominates", top >= max(rnd, coord) * (1 - 1e-9))
        maxima.append(top)
    spread = st.spread_ratio(maxima)
    rep.fitted_constants["C_poincare"] = maxima
    rep.stat("spread", spread)
    rep.verdict("stable_across_R", spread < stable_factor, stable_factor)
    return rep


def harnack_check(field: ConductanceField, centers, R_list=(8, 16, 32), mode: str = "elliptic",
                  stable_factor: float = 2.0, tol: float = 1e-8) -> VerificationReport:
    """Harnack constants per radius (max over centres); stable when max/min over R < 2."""
    if mode not in ("elliptic", "parabolic"):
        raise ParameterError("mode must be elliptic or parabolic")
    if isinstance(centers, (int, np.integer)) or (isinstance(centers, tuple) and np.isscalar(centers[0])):
        centers = [centers]
    R_list = sorted(int(r) for r in R_list)
    rep = VerificationReport("harnack", {"field": str(field.law), "sides": field.lattice.sides, "mode": mode,
                                         "centers": [c if isinstance(c, (int, np.integer)) else list(c)
                                                     for c in centers], "R_list": R_list})
    consts = []
    for R in R_list:
        vals = []
        for c in centers:
            if mode == "elliptic":
                vals.append(elliptic_ratio(field, c, R))
            else:
                vals.append(parabolic_ratio(field, c, R, tol=tol))
        C = float(max(vals))
        consts.append(C)
        rep.stat(f"R={R}.C", C)
        rep.verdict(f"R={R}.finite", math.isfinite(C))
    spread = st.spread_ratio(consts)
    rep.fitted_constants["C_H" if mode == "elliptic" else "C_P"] = consts
    rep.stat("spread", spread)
    rep.verdict("stable_across_R", spread < stable_factor, stable_factor)
    return rep
