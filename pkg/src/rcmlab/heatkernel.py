"""Heat kernels, Green's functions and kernel diagnostics on finite boxes.

Kernels are densities with respect to counting measure, so for the VSRW
``q_t(x, y) = P^x(X_t = y)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import linalg, walk
from .environment import ConductanceField
from .errors import ConfigurationError, ParameterError, ResourceError
from .metric import FppField, graph_distance

DEFAULT_MAX_STEPS = 5_000_000


@dataclass(frozen=True, eq=False)
class KernelField:
    """``values[i]`` is ``q_{times[i]}(origin, .)`` on all sites of the box.

    ``bc`` is ``"torus"``, ``"free"`` (reflecting box) or ``"dirichlet"``;
    for a Dirichlet kernel ``domain`` marks the sites where the walk is alive.
    """

    origin: int
    times: np.ndarray
    values: np.ndarray
    bc: str
    tol: float
    domain: np.ndarray | None = None
    steps: int = 0

    def at(self, t: float) -> np.ndarray:
        i = np.nonzero(np.isclose(self.times, t, rtol=1e-12, atol=0))[0]
        if len(i) == 0:
            raise ParameterError(f"time {t} was not computed")
        return self.values[i[0]]


@dataclass(frozen=True, eq=False)
class NashDiagnostics:
    times: np.ndarray
    M: np.ndarray
    Q: np.ndarray


def ball_domain(field: ConductanceField, center, R: int) -> np.ndarray:
    """Mask of the graph ball ``B(center, R) = {y : d(center, y) < R}``."""
    return graph_distance(field.lattice, center) < R


def box_interior(field: ConductanceField, margin: int = 1) -> np.ndarray:
    """Mask of sites at least ``margin`` away from every face of a free box."""
    lat = field.lattice
    c = lat.all_coords()
    sides = np.asarray(lat.sides)
    return np.all((c >= margin) & (c <= sides - 1 - margin), axis=1)


def poisson_window(lam_t: float, tol: float) -> tuple[int, int]:
    """Index range holding all but ``tol`` of the Poisson(lam_t) mass."""
    if lam_t == 0:
        return 0, 0
    lo = int(stats.poisson.ppf(tol / 2, lam_t))
    lo = max(lo - 1, 0)
    while lo > 0 and stats.poisson.cdf(lo - 1, lam_t) > tol / 2:
        lo -= 1
    hi = int(stats.poisson.isf(tol / 2, lam_t)) + 1
    while stats.poisson.sf(hi, lam_t) > tol / 2:
        hi += 1
    return lo, hi


def solve_kernel(field: ConductanceField, x0, times, bc: str | None = None, tol: float = 1e-9,
                 domain: np.ndarray | None = None, max_steps: int = DEFAULT_MAX_STEPS) -> KernelField:
    """Solve ``dq/dt = L q`` from ``q_0 = delta_x0`` by uniformization.

    ``e^{tL} = sum_k Pois(k; Lam t) P^k`` with ``P = I + L / Lam`` and
    ``Lam = max_x mu_x``.  ``P`` is (sub)stochastic, so every entry of the
    truncated sum is within the neglected Poisson mass, which is kept below
    ``tol / 2`` for every requested time; the other half is headroom for
    rounding accumulated over many steps.
    """
    times = np.asarray(times, dtype=np.float64)
    if not tol > 0:
        raise ParameterError("tol must be positive")
    if np.any(times <= 0) or np.any(np.diff(times) < 0):
        raise ParameterError("times must be positive and sorted")
    lat = field.lattice
    if bc is None:
        bc = "dirichlet" if domain is not None else lat.boundary
    if bc == "dirichlet" and domain is None:
        raise ParameterError("a dirichlet kernel needs a domain mask")
    if bc in ("torus", "free") and bc != lat.boundary:
        raise ParameterError(f"bc={bc} does not match the lattice boundary {lat.boundary}")
    x = field._site(x0)
    if domain is not None:
        domain = np.asarray(domain, dtype=bool)
        if not domain[x]:
            raise ParameterError("origin outside the Dirichlet domain")
        idx = np.nonzero(domain)[0]
    else:
        idx = np.arange(lat.n_sites)
    L = linalg.generator(field, domain)
    rates = np.asarray(field.mu_x)[idx]
    lam = float(rates.max())
    windows = [poisson_window(lam * t, tol / 2) for t in times]
    k_max = max(hi for _, hi in windows)
    if k_max > max_steps:
        raise ResourceError(
            f"uniformization needs {k_max} steps (Lambda={lam:.4g}, t={times[-1]:g}); budget {max_steps}",
            required=k_max,
        )
    P = L / lam
    v = np.zeros(len(idx))
    v[np.searchsorted(idx, x)] = 1.0
    acc = np.zeros((len(times), len(idx)))
    logw = [None] * len(times)
    for i, (t, (lo, hi)) in enumerate(zip(times, windows)):
        ks = np.arange(lo, hi + 1)
        w = np.exp(stats.poisson.logpmf(ks, lam * t))
        # logpmf cancels terms of size Lam t; pin the window to its exact mass
        mass = stats.poisson.cdf(hi, lam * t) - (stats.poisson.cdf(lo - 1, lam * t) if lo > 0 else 0.0)
        logw[i] = (lo, w * (mass / w.sum()))
    for k in range(k_max + 1):
        for i, (lo, w) in enumerate(logw):
            j = k - lo
            if 0 <= j < len(w):
                acc[i] += w[j] * v
        v = v + P @ v
    np.maximum(acc, 0.0, out=acc)
    values = np.zeros((len(times), lat.n_sites))
    values[:, idx] = acc
    return KernelField(x, times, values, bc, tol, domain, k_max)


def mc_kernel(field: ConductanceField, x0, t: float, paths: int, seed: int):
    """Empirical occupation frequencies at time ``t`` with binomial standard errors."""
    if paths < 1:
        raise ParameterError("paths must be >= 1")
    x = field._site(x0)
    if t == 0:
        est = np.zeros(field.n_sites)
        est[x] = 1.0
        return est, np.zeros(field.n_sites)
    batch = walk.observe(field, walk.VSRW, x, [t], seed, n_paths=paths)
    counts = np.bincount(batch.sites[:, 0], minlength=field.n_sites)
    est = counts / paths
    return est, np.sqrt(est * (1 - est) / paths)


def green_function(field: ConductanceField, x0, domain: np.ndarray, tol: float = 1e-10,
                   maxiter: int | None = None) -> np.ndarray:
    """Killed Green's function: solves ``L g = -delta_x0`` in ``domain``, ``g = 0`` outside."""
    domain = np.asarray(domain, dtype=bool)
    x = field._site(x0)
    if not domain[x]:
        raise ParameterError("origin outside the Dirichlet domain")
    idx = np.nonzero(domain)[0]
    A = -linalg.generator(field, domain)
    b = np.zeros(len(idx))
    b[np.searchsorted(idx, x)] = 1.0
    sol, _, _ = linalg.cg(A, b, tol=tol, maxiter=maxiter, M_diag=A.diagonal())
    g = np.zeros(field.n_sites)
    g[idx] = sol
    return g


def nash_diagnostics(kernel: KernelField, fpp: FppField) -> NashDiagnostics:
    """Mean first-passage displacement ``M(t)`` and entropy ``Q(t)`` of the kernel."""
    if kernel.origin != fpp.origin:
        raise ParameterError("kernel and fpp field must share the origin")
    q = kernel.values
    M = q @ fpp.dist
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = -np.sum(np.where(q > 0, q * np.log(q), 0.0), axis=1)
    return NashDiagnostics(kernel.times.copy(), M, Q)


def kernel_distances(field: ConductanceField, origin: int) -> np.ndarray:
    """Euclidean (minimal-image) distance from ``origin`` to every site."""
    lat = field.lattice
    diff = lat.displacement(lat.coords(origin), lat.all_coords())
    return np.linalg.norm(diff, axis=1)


def envelope_constants(kernel: KernelField, field: ConductanceField, fpp: FppField | None = None,
                       eta: float = 0.5, kappa: float = 2.0, t_min: float = 1.0) -> dict:
    """Fit envelope constants by direct max-ratio scans over the kernel grid.

    * ``c3``: smallest constant with ``q_t <= c3 t^{-d/2}`` everywhere.
    * ``c4_gauss``: largest rate with ``q_t <= kappa c3 t^{-d/2} e^{-c4 D^2/t}`` for ``t >= D``.
    * ``c4_long``: largest rate with ``q_t <= kappa max(c3, 1) e^{-c4 D (1 v log(D/t))}`` for ``t <= D``.
    * ``c5``: smallest on-diagonal value of ``q_t t^{d/2}`` for ``t >= t_min``, and
      ``c6``: smallest rate with ``q_t >= (c5/kappa) t^{-d/2} e^{-c6 D^2/t}`` on
      ``t >= max(t_min, D^{1+eta})``.
    * with ``fpp``: the same upper-envelope rates in the first-passage metric.

    ``D`` is the Euclidean distance.  Non-positive kernel values are skipped
    in the lower-envelope scan only where the regime excludes them.
    """
    d = field.dim
    D = kernel_distances(field, kernel.origin)
    out = {}
    q = kernel.values
    if kernel.domain is not None:
        alive = kernel.domain
    else:
        alive = np.ones(field.n_sites, dtype=bool)
    T = kernel.times[:, None]
    scaled = q * T ** (d / 2)
    c3 = float(scaled[:, alive].max())
    out["c3"] = c3
    tiny = 1e-300

    def _rate_upper(mask, num, denom):
        sel = mask & (denom > 0)
        if not np.any(sel):
            return math.inf
        return float(np.min(num[sel] / denom[sel]))

    Dg = np.broadcast_to(D[None, :], q.shape)
    gauss = (T >= Dg) & alive[None, :]
    with np.errstate(divide="ignore"):
        log_ratio = np.log(kappa * c3 / np.maximum(scaled, tiny))
    out["c4_gauss"] = _rate_upper(gauss, log_ratio, Dg**2 / T)
    long_mask = (T <= Dg) & alive[None, :]
    pref = kappa * max(c3, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(pref / np.maximum(q, tiny))
        shape = Dg * np.maximum(1.0, np.log(np.where(Dg > 0, Dg / T, 1.0)))
    out["c4_long"] = _rate_upper(long_mask, lr, shape)
    lower = (T >= np.maximum(t_min, Dg ** (1 + eta))) & alive[None, :]
    if not np.any(lower):
        raise ConfigurationError("lower-envelope regime grid is empty")
    diag = lower & (Dg == 0)
    c5 = float(scaled[diag].min()) if np.any(diag) else float(scaled[lower].min())
    out["c5"] = c5
    with np.errstate(divide="ignore"):
        need = np.log((c5 / kappa) / np.maximum(scaled, tiny))
    off = lower & (Dg > 0)
    Tg = np.broadcast_to(T, q.shape)
    out["c6"] = max(0.0, float(np.max(need[off] * Tg[off] / Dg[off] ** 2))) if np.any(off) else 0.0
    out["n_lower_points"] = int(lower.sum())
    if fpp is not None:
        Dt = np.broadcast_to(fpp.dist[None, :], q.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            lq = np.log(pref / np.maximum(q, tiny))
            long_t = Dt * np.maximum(1.0, np.log(np.where(Dt > 0, Dt / T, 1.0)))
        out["fpp_prefactor"] = pref
        out["fpp_gauss_rate"] = _rate_upper((Dt <= T) & alive[None, :], lq, Dt**2 / T)
        out["fpp_long_rate"] = _rate_upper((Dt >= T) & alive[None, :], lq, long_t)
    return out


def write_kernel_csv(path, kernel: KernelField, field: ConductanceField) -> None:
    coords = field.lattice.all_coords()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(field.dim)] + [f"q_t={t:g}" for t in kernel.times])
        for i in range(field.n_sites):
            w.writerow([*coords[i].tolist(), *(repr(float(v)) for v in kernel.values[:, i])])
