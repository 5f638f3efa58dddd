"""Graph distance, the first-passage metric and lambda-goodness.

The first-passage metric gives each edge the traversal time
``min(c_a, mu_e ** -0.5)`` and measures the shortest journey time between
sites.  Fast (high conductance) regions are therefore metrically small.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra, shortest_path

from . import environment as env
from .environment import ConductanceField, ConductanceLaw, LatticeSpec
from .errors import ParameterError, TruncationError, UnsupportedOperationError


@dataclass(frozen=True, eq=False)
class FppField:
    origin: int
    c_a: float
    dist: np.ndarray


@dataclass(frozen=True)
class GoodnessReport:
    x: int
    lam: float
    eta: float
    n_max: int
    good_radius: int | None
    very_good_radius: int | None
    truncated: bool = True


def edge_times(field: ConductanceField, c_a: float = 1.0) -> np.ndarray:
    if not c_a > 0:
        raise ParameterError("c_a must be positive")
    return np.minimum(c_a, field.mu ** -0.5)


def _graph(lattice: LatticeSpec, weights: np.ndarray) -> sp.csr_matrix:
    ends = lattice.edge_ends
    n = lattice.n_sites
    a = np.minimum(ends[:, 0], ends[:, 1])
    b = np.maximum(ends[:, 0], ends[:, 1])
    # parallel edges only occur on side-2 tori; keep the cheaper one
    key = a * n + b
    order = np.lexsort((weights, key))
    keep = np.ones(len(order), dtype=bool)
    keep[1:] = key[order][1:] != key[order][:-1]
    sel = order[keep]
    rows = np.concatenate([a[sel], b[sel]])
    cols = np.concatenate([b[sel], a[sel]])
    w = np.concatenate([weights[sel], weights[sel]])
    return sp.csr_matrix((w, (rows, cols)), shape=(n, n))


def _origin(lattice: LatticeSpec, x0) -> int:
    if isinstance(x0, (int, np.integer)):
        if not 0 <= x0 < lattice.n_sites:
            raise IndexError(f"site index {x0} out of range")
        return int(x0)
    return lattice.index(x0)


def graph_distance(field_or_lattice, x0) -> np.ndarray:
    """BFS hop distances from ``x0`` to every site (integer array)."""
    lat = field_or_lattice.lattice if isinstance(field_or_lattice, ConductanceField) else field_or_lattice
    src = _origin(lat, x0)
    g = _graph(lat, np.ones(lat.n_edges))
    dist = shortest_path(g, method="D", unweighted=True, indices=src)
    return dist.astype(np.int64)


def fpp_distances(field: ConductanceField, x0, c_a: float = 1.0) -> FppField:
    """Exact single-source first-passage distances (Dijkstra)."""
    src = _origin(field.lattice, x0)
    g = _graph(field.lattice, edge_times(field, c_a))
    dist = dijkstra(g, directed=False, indices=src)
    dist.setflags(write=False)
    return FppField(src, float(c_a), dist)


def fpp_all_pairs(field: ConductanceField, c_a: float = 1.0) -> np.ndarray:
    g = _graph(field.lattice, edge_times(field, c_a))
    return dijkstra(g, directed=False)


def _max_inbox_radius(lattice: LatticeSpec, x: int) -> int:
    """Largest n such that the graph ball B(x, n) never touches the box edge."""
    if lattice.boundary == "torus":
        return min(s // 2 for s in lattice.sides)
    c = lattice.coords(x)
    return int(min(min(ci, s - 1 - ci) for ci, s in zip(c, lattice.sides))) + 1


def _good_profile(d_graph: np.ndarray, d_fpp: np.ndarray, lam: float, n_max: int) -> np.ndarray:
    """``ok[n]`` is True iff B~(x, n/lam) is inside B(x, n); index 0 unused."""
    # B~(x, n/lam) within B(x, n)  <=>  every y with d(x,y) >= n has d~(x,y) >= n/lam
    ok = np.ones(n_max + 1, dtype=bool)
    order = np.argsort(d_graph, kind="stable")
    dg = d_graph[order]
    # min fpp distance among sites with graph distance >= n, for n = 0..n_max
    suffix_min = np.minimum.accumulate(d_fpp[order][::-1])[::-1]
    first = np.searchsorted(dg, np.arange(n_max + 1), side="left")
    has = first < len(dg)
    m = np.where(has, suffix_min[np.minimum(first, len(dg) - 1)], np.inf)
    ok[:] = m >= np.arange(n_max + 1) / lam
    return ok


def is_lambda_good(field: ConductanceField, x, r: int, lam: float, n_max: int, c_a: float = 1.0) -> bool:
    """Truncated check that B~(x, n/lam) lies in B(x, n) for all r <= n <= n_max."""
    if r < 1:
        raise ParameterError("r must be >= 1")
    lat = field.lattice
    xi = _origin(lat, x)
    if n_max > _max_inbox_radius(lat, xi):
        raise TruncationError(
            f"n_max={n_max} exceeds the in-box radius {_max_inbox_radius(lat, xi)} at site {x}"
        )
    if r > n_max:
        return True
    ok = _good_profile(graph_distance(lat, xi), fpp_distances(field, xi, c_a).dist, lam, n_max)
    return bool(np.all(ok[r:]))


def good_radius(field: ConductanceField, x, lam: float, n_max: int, c_a: float = 1.0) -> int | None:
    """Smallest r such that (x, r) is lambda-good up to ``n_max``; None if there is none."""
    lat = field.lattice
    xi = _origin(lat, x)
    if n_max > _max_inbox_radius(lat, xi):
        raise TruncationError(f"n_max={n_max} exceeds the in-box radius at site {x}")
    ok = _good_profile(graph_distance(lat, xi), fpp_distances(field, xi, c_a).dist, lam, n_max)
    return _smallest_good_radius(ok)


def _smallest_good_radius(ok: np.ndarray) -> int | None:
    n_max = len(ok) - 1
    bad = np.nonzero(~ok[1:])[0]
    if len(bad) == 0:
        return 1
    r = int(bad[-1]) + 2
    return r if r <= n_max else None


def very_good_radius(field: ConductanceField, x, lam: float, eta: float, n_max: int,
                     c_a: float = 1.0) -> GoodnessReport:
    """Smallest R <= n_max for which (x, R) passes the truncated very-good test.

    (x, R) is very good when, for every R' in [R, n_max], every y in
    B(x, R') and every integer r >= R'^eta, (y, r) is good up to n_max.
    Sites y whose own in-box radius is below n_max are checked up to that
    radius.
    """
    if not 0 < eta < 1:
        raise ParameterError("eta must lie in (0, 1)")
    lat = field.lattice
    xi = _origin(lat, x)
    if n_max > _max_inbox_radius(lat, xi):
        raise TruncationError(f"n_max={n_max} exceeds the in-box radius at site {x}")
    d_from_x = graph_distance(lat, xi)
    ball = np.nonzero(d_from_x < n_max)[0]
    # smallest good radius of each y in B(x, n_max)
    g = _graph(lat, edge_times(field, c_a))
    gu = _graph(lat, np.ones(lat.n_edges))
    d_fpp = dijkstra(g, directed=False, indices=ball)
    d_gr = shortest_path(gu, method="D", unweighted=True, indices=ball)
    rho = np.empty(len(ball), dtype=np.int64)  # good radius, n_max + 1 if none
    for k, y in enumerate(ball):
        ny = min(n_max, _max_inbox_radius(lat, int(y)))
        ok = _good_profile(d_gr[k].astype(np.int64), d_fpp[k], lam, ny)
        gr = _smallest_good_radius(ok)
        rho[k] = n_max + 1 if gr is None else gr
    own = _smallest_good_radius(_good_profile(d_from_x, dijkstra(g, directed=False, indices=xi), lam, n_max))
    dist_in_ball = d_from_x[ball]

    def passes(R: int) -> bool:
        for Rp in range(R, n_max + 1):
            need = math.ceil(Rp ** eta)
            if np.any(rho[dist_in_ball < Rp] > max(need, 1)):
                return False
        return True

    vg = None
    for R in range(n_max, 0, -1):
        if passes(R):
            vg = R
        else:
            break
    return GoodnessReport(xi, lam, eta, n_max, own, vg)


def shrinkage_probability(law: ConductanceLaw, lattice: LatticeSpec, c_a: float, lam: float, r: float,
                          trials: int, seed: int) -> tuple[float, float]:
    """MC estimate of P(B~(0, r) within the Euclidean ball B_E(0, lam * r)) with binomial SE.

    Distances are computed inside the box only, so journeys that would leave
    it are ignored; the box must contain B_E(0, lam * r).
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if law.kind == "explicit":
        # one fixed field has no inclusion probability to speak of
        raise UnsupportedOperationError("shrinkage needs an i.i.d. law, not an explicit field")
    x0 = lattice.center()
    xi = lattice.index(x0)
    half = min(min(c, s - 1 - c) for c, s in zip(x0, lattice.sides))
    if lattice.boundary == "torus":
        half = min(s // 2 for s in lattice.sides) - 1
    if lam * r > half:
        raise TruncationError(f"box half-width {half} cannot contain B_E(0, {lam * r:g})")
    coords = lattice.all_coords()
    eucl = np.linalg.norm(lattice.displacement(np.asarray(x0), coords), axis=1)
    hits = 0
    for k in range(trials):
        field = env.generate(lattice, law, _trial_seed(seed, k))
        d = fpp_distances(field, xi, c_a).dist
        inside = d < r
        if np.all(eucl[inside] < lam * r):
            hits += 1
    p = hits / trials
    return p, math.sqrt(max(p * (1 - p), 0.0) / trials)


def _trial_seed(seed: int, k: int) -> int:
    from .rng import derive_seed

    return derive_seed(seed, 0x5A1, k)


def write_distance_csv(path, field: ConductanceField, x0, c_a: float = 1.0) -> None:
    lat = field.lattice
    dg = graph_distance(lat, x0)
    df = fpp_distances(field, x0, c_a).dist
    coords = lat.all_coords()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(lat.dim)] + ["d_graph", "d_fpp"])
        for i in range(lat.n_sites):
            w.writerow([*coords[i].tolist(), int(dg[i]), repr(float(df[i]))])
