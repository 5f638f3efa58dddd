"""Periodic corrector, harmonic coordinates and the corrector-energy diffusivity.

On a torus the coordinate map is not a function but its edge increments
are well defined, so the cell problem is posed on increments: for each
axis ``j`` find a periodic ``chi_j`` with ``L chi_j = L Pi_j`` where
``(L Pi_j)(x) = sum_y mu_xy (y - x)_j`` (winding-corrected).  The harmonic
coordinate ``h_j = Pi_j - chi_j`` then satisfies ``L h_j = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import linalg, rng, walk
from .analysis.report import VerificationReport
from .environment import ConductanceField, ConductanceLaw, LatticeSpec, generate
from .errors import ParameterError, UnsupportedOperationError


@dataclass(frozen=True, eq=False)
class CorrectorField:
    """``chi[j]`` is the corrector for axis ``j``, gauged by ``chi[j][0] = 0``."""

    field: ConductanceField
    chi: np.ndarray  # (dim, n_sites)
    residual: float

    def edge_increments(self, j: int) -> np.ndarray:
        """``h_j(x + e_k) - h_j(x)`` for every edge ``(x, k)``."""
        lat = self.field.lattice
        a, b = lat.edge_ends[:, 0], lat.edge_ends[:, 1]
        return (lat.edge_axis == j).astype(np.float64) - (self.chi[j][b] - self.chi[j][a])

    def harmonic_residual(self) -> float:
        """Max over sites and axes of ``|sum_y mu_xy (h_j(y) - h_j(x))|``."""
        f = self.field
        lat = f.lattice
        out = 0.0
        for j in range(f.dim):
            flux = f.mu * self.edge_increments(j)
            div = np.zeros(f.n_sites)
            np.add.at(div, lat.edge_ends[:, 0], flux)
            np.subtract.at(div, lat.edge_ends[:, 1], flux)
            out = max(out, float(np.abs(div).max()))
        return out


@dataclass(frozen=True)
class DiffusivityEstimate:
    sigma2: tuple
    method: str
    se: tuple | None = None

    @property
    def isotropic(self) -> float:
        return float(np.mean(self.sigma2))


def drift_vector(field: ConductanceField, j: int) -> np.ndarray:
    """``(L Pi_j)(x) = mu(x, x + e_j) - mu(x, x - e_j)``."""
    nm = field.nbr_mu
    return nm[:, 2 * j + 1] - nm[:, 2 * j]


def solve_corrector(field: ConductanceField, tol: float = 1e-10, maxiter: int | None = None) -> CorrectorField:
    """Solve the periodic cell problem for every axis by projected CG."""
    if field.lattice.boundary != "torus":
        raise UnsupportedOperationError("the corrector is only defined on a torus")
    A = -linalg.generator(field)
    diag = np.asarray(field.mu_x)
    chi = np.zeros((field.dim, field.n_sites))
    worst = 0.0
    for j in range(field.dim):
        b = -drift_vector(field, j)
        x, res, _ = linalg.cg(A, b, tol=tol, maxiter=maxiter, M_diag=diag, project_mean=True)
        chi[j] = x - x[0]
        bn = np.linalg.norm(b)
        worst = max(worst, res / bn if bn > 0 else 0.0)
    chi.setflags(write=False)
    return CorrectorField(field, chi, worst)


def sigma2_from_corrector(corr: CorrectorField) -> DiffusivityEstimate:
    """``sigma_j^2 = N^-1 sum_x sum_{y~x} mu_xy (h_j(y) - h_j(x))^2``."""
    f = corr.field
    vals = tuple(
        float(2.0 * np.sum(f.mu * corr.edge_increments(j) ** 2) / f.n_sites) for j in range(f.dim)
    )
    return DiffusivityEstimate(vals, "corrector_energy")


def harmonic_value(corr: CorrectorField, sites: np.ndarray, disp: np.ndarray, start: np.ndarray) -> np.ndarray:
    """``h(X_t) - h(X_0)`` from unwrapped displacements: ``disp - (chi(X_t) - chi(X_0))``."""
    chi = corr.chi
    return disp - (chi[:, sites] - chi[:, start]).T


def max_corrector_ratio(corr: CorrectorField) -> float:
    """``max_x |chi(x)| / L`` with ``L`` the smallest side."""
    norm = np.sqrt(np.sum(np.asarray(corr.chi) ** 2, axis=0))
    return float(norm.max() / min(corr.field.lattice.sides))


def dirichlet_energy_profile(corr: CorrectorField, j: int, center) -> tuple[np.ndarray, np.ndarray]:
    """Distance of each edge midpoint's lower end from ``center`` and the chi energy on that edge."""
    f = corr.field
    lat = f.lattice
    a, b = lat.edge_ends[:, 0], lat.edge_ends[:, 1]
    energy = f.mu * (corr.chi[j][b] - corr.chi[j][a]) ** 2
    c = lat.coords(f._site(center))
    dist = np.abs(lat.displacement(c, lat.coords(a))).sum(axis=1)
    return dist, energy


def zero_corrector(field: ConductanceField) -> CorrectorField:
    """The trivial corrector; used as a negative control."""
    chi = np.zeros((field.dim, field.n_sites))
    chi.setflags(write=False)
    return CorrectorField(field, chi, float("nan"))


def martingale_check(field: ConductanceField, corr: CorrectorField, x0, t_grid, paths: int, seed: int,
                     z: float = 3.0) -> VerificationReport:
    """MC test of ``E^{x0}[h_j(X_t) - h_j(x0)] = 0`` at every grid time and coordinate."""
    if corr.field is not field and corr.field != field:
        raise ParameterError("corrector was solved on a different field")
    x = field._site(x0)
    t_grid = np.asarray(sorted(t_grid), dtype=np.float64)
    b = walk.observe(field, walk.VSRW, x, t_grid, seed, n_paths=paths)
    rep = VerificationReport("martingale", {"field": str(field.law), "sides": field.lattice.sides,
                                            "x0": x, "t_grid": t_grid.tolist(), "paths": paths, "seed": seed})
    start = np.full(paths, x)
    for k, t in enumerate(t_grid):
        hv = harmonic_value(corr, b.sites[:, k], b.disp[:, k, :].astype(np.float64), start)
        m = hv.mean(axis=0)
        se = hv.std(axis=0, ddof=1) / np.sqrt(paths) if paths > 1 else np.full(field.dim, np.inf)
        for j in range(field.dim):
            rep.stat(f"t={t:g}.drift_{j + 1}", float(m[j]), float(se[j]))
            rep.verdict(f"t={t:g}.coord{j + 1}", abs(m[j]) <= z * se[j], f"{z:g} SE")
    return rep


def sublinearity_scan(law, sizes=(16, 32, 64), seed: int = 0, seeds: int = 20, d: int = 2,
                      tol: float = 1e-10) -> VerificationReport:
    """Median of ``max|chi| / L`` over fresh environments, per box size; must decrease in ``L``."""
    law = ConductanceLaw.parse(law) if isinstance(law, str) else law
    sizes = sorted(int(s) for s in sizes)
    if len(sizes) < 3:
        raise ParameterError("at least three box sizes are needed")
    rep = VerificationReport("sublinearity", {"law": str(law), "sizes": sizes, "seed": seed, "seeds": seeds,
                                              "d": d, "tol": tol})
    medians = []
    for L in sizes:
        ratios = []
        for i in range(seeds):
            f = generate(LatticeSpec.cube(d, L, "torus"), law, rng.derive_seed(seed, L, i))
            ratios.append(max_corrector_ratio(solve_corrector(f, tol)))
        med = float(np.median(ratios))
        medians.append(med)
        rep.stat(f"L={L}.median_ratio", med)
        rep.stat(f"L={L}.max_ratio", float(np.max(ratios)))
    if all(m < 1e-12 for m in medians):
        rep.verdict("identically_zero", True)
    else:
        rep.verdict("median_decreasing", bool(np.all(np.diff(medians) < 0)))
    return rep


def write_corrector_csv(path, corr: CorrectorField) -> None:
    lat = corr.field.lattice
    coords = lat.all_coords()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(lat.dim)] + [f"chi_{j + 1}" for j in range(lat.dim)])
        for i in range(lat.n_sites):
            w.writerow([*coords[i].tolist(), *(repr(float(v)) for v in corr.chi[:, i])])
