"""Sparse generator assembly and a conjugate-gradient solver."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .environment import ConductanceField
from .errors import NumericalError


def generator(field: ConductanceField, domain: np.ndarray | None = None) -> sp.csr_matrix:
    """VSRW generator ``L f(x) = sum_y mu_xy (f(y) - f(x))`` as a symmetric CSR matrix.

    With a boolean ``domain`` mask the operator is restricted to those sites
    and the walk is killed on leaving: the diagonal keeps the full ``mu_x``.
    """
    lat = field.lattice
    ends = lat.edge_ends
    n = lat.n_sites
    rows = np.concatenate([ends[:, 0], ends[:, 1]])
    cols = np.concatenate([ends[:, 1], ends[:, 0]])
    w = np.concatenate([field.mu, field.mu])
    A = sp.csr_matrix((w, (rows, cols)), shape=(n, n))
    L = (A - sp.diags(np.asarray(field.mu_x))).tocsr()
    if domain is None:
        return L
    idx = np.nonzero(domain)[0]
    return L[idx][:, idx].tocsr()


def cg(A, b, tol=1e-10, maxiter=None, M_diag=None, project_mean=False, x0=None):
    """Preconditioned conjugate gradients for symmetric positive (semi)definite ``A``.

    ``tol`` is relative to ``||b||``.  With ``project_mean`` the iterates are
    kept orthogonal to constants, which is how singular systems with a
    constant nullspace (periodic Laplacians) are handled.

    Returns ``(x, residual_norm, iterations)``.
    """
    n = b.shape[0]
    maxiter = maxiter or 10 * n
    inv_m = np.ones(n) if M_diag is None else 1.0 / M_diag

    def proj(v):
        return v - v.mean() if project_mean else v

    x = np.zeros(n) if x0 is None else proj(np.array(x0, dtype=np.float64))
    b = proj(np.asarray(b, dtype=np.float64))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0.0, 0
    r = b - A @ x
    r = proj(r)
    z = proj(inv_m * r)
    p = z.copy()
    rz = r @ z
    target = tol * bnorm
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if project_mean:
            r = proj(r)
        rn = np.linalg.norm(r)
        if rn <= target:
            x = proj(x)
            true_res = np.linalg.norm(proj(b - A @ x))
            if true_res <= 10 * target:
                return x, true_res, it
            r = proj(b - A @ x)
        z = proj(inv_m * r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NumericalError(f"CG did not reach tol={tol:g} in {maxiter} iterations (residual {rn:.3g})")
