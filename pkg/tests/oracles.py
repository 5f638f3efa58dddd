"""Independent reference implementations used by the tests.

Each one is written from the definitions with explicit loops and shares no
code path with the package beyond the lattice geometry.
"""
from __future__ import annotations

import math

import numpy as np


def grid_edges_free(side: int):
    """Edges of a free ``side x side`` box as ``{(a, b): index}`` with row-major sites."""
    out = {}
    e = 0
    for i in range(side):
        for j in range(side):
            a = i * side + j
            for di, dj in ((1, 0), (0, 1)):
                ii, jj = i + di, j + dj
                if ii < side and jj < side:
                    out[(a, ii * side + jj)] = e
                e += 1
    return out


def brute_force_fpp(side: int, weights_by_pair: dict, source: int) -> np.ndarray:
    """Minimum over all simple paths of the left-to-right sum of edge weights."""
    n = side * side
    adj = [[] for _ in range(n)]
    for (a, b), w in weights_by_pair.items():
        adj[a].append((b, w))
        adj[b].append((a, w))
    best = np.full(n, math.inf)
    best[source] = 0.0
    visited = [False] * n
    visited[source] = True

    def dfs(u, acc):
        for v, w in adj[u]:
            if not visited[v]:
                t = acc + w
                if t < best[v]:
                    best[v] = t
                visited[v] = True
                dfs(v, t)
                visited[v] = False

    dfs(source, 0.0)
    return best


def dense_poincare_forms(side: int, mu_h: np.ndarray, mu_v: np.ndarray, center, R: int):
    """Quadratic forms of the weighted Poincare inequality on a free ``side^2`` box by loops.

    ``mu_h[i, j]`` joins ``(i, j)`` and ``(i + 1, j)``; ``mu_v[i, j]`` joins
    ``(i, j)`` and ``(i, j + 1)``.  The ball is ``{|y - center|_1 < R}``.
    """
    ci, cj = center
    ball = [(i, j) for i in range(side) for j in range(side) if abs(i - ci) + abs(j - cj) < R]
    pos = {s: k for k, s in enumerate(ball)}
    n = len(ball)
    phi = np.empty(n)
    for k, (i, j) in enumerate(ball):
        rho = R - (abs(i - ci) + abs(j - cj))
        phi[k] = R**2 * min(R, rho) ** 2
    V = np.zeros((n, n))
    tot = phi.sum()
    for a in range(n):
        V[a, a] += phi[a]
        for b in range(n):
            V[a, b] -= phi[a] * phi[b] / tot
    E = np.zeros((n, n))

    def mu(p, q):
        (i, j), (k, l) = sorted([p, q])
        return mu_h[i, j] if k == i + 1 else mu_v[i, j]

    for p in ball:
        for q in ((p[0] + 1, p[1]), (p[0] - 1, p[1]), (p[0], p[1] + 1), (p[0], p[1] - 1)):
            if q in pos:
                # ordered pair (p, q); the pair (q, p) is visited from q
                w = R**2 * min(phi[pos[p]], phi[pos[q]]) * mu(p, q)
                a, b = pos[p], pos[q]
                E[a, a] += w
                E[b, b] += w
                E[a, b] -= w
                E[b, a] -= w
    return ball, V, E


def two_site_diagonal(mu: float, t: float) -> float:
    """``q_t(x, x)`` for one edge of conductance ``mu``: ``(1 + exp(-2 mu t)) / 2``."""
    return 0.5 * (1.0 + math.exp(-2.0 * mu * t))


def dense_corrector_sigma2(side: int, mu_h: np.ndarray, mu_v: np.ndarray) -> tuple[float, float]:
    """Periodic cell problem on a ``side^2`` torus by a dense pseudo-inverse solve.

    ``mu_h[i, j]`` joins ``(i, j)`` and ``(i + 1, j)`` (axis 1), ``mu_v[i, j]``
    joins ``(i, j)`` and ``(i, j + 1)`` (axis 2).  For each axis the harmonic
    coordinate minimises the periodic energy; the diffusivity is twice its
    energy per site.
    """
    n = side * side

    def idx(i, j):
        return (i % side) * side + (j % side)

    edges = []
    for i in range(side):
        for j in range(side):
            edges.append((idx(i, j), idx(i + 1, j), mu_h[i, j], 0))
            edges.append((idx(i, j), idx(i, j + 1), mu_v[i, j], 1))
    A = np.zeros((n, n))
    for a, b, m, _ in edges:
        A[a, a] += m
        A[b, b] += m
        A[a, b] -= m
        A[b, a] -= m
    out = []
    for axis in (0, 1):
        # minimise sum mu (e_axis - (chi(b) - chi(a)))^2: normal equations A chi = B^T mu e
        rhs = np.zeros(n)
        for a, b, m, k in edges:
            if k == axis:
                rhs[b] += m
                rhs[a] -= m
        chi = np.linalg.lstsq(A, rhs, rcond=None)[0]
        energy = 0.0
        for a, b, m, k in edges:
            inc = (1.0 if k == axis else 0.0) - (chi[b] - chi[a])
            energy += m * inc * inc
        out.append(2.0 * energy / n)
    return out[0], out[1]
