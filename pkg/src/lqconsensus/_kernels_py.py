"""Pure-Python (numpy) implementations of the iteration-heavy kernels.

Mirrors the compiled extension ``lqconsensus._kernels``; the active
implementation is chosen at import time by :mod:`lqconsensus.backend`.
"""

from __future__ import annotations

import numpy as np


def dare_value_iteration(A, B, Q, R, tol, max_iter):
    """Fixed-point iteration P <- A'PA + Q - A'PB (R+B'PB)^-1 B'PA from P0=Q.

    Returns (P, residual, iterations, converged) where residual is the
    Frobenius norm of the defining identity gap evaluated at the returned P.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    R = np.ascontiguousarray(R, dtype=np.float64)

    def rhs(P):
        W = B.T @ P @ A
        G = R + B.T @ P @ B
        if not np.isfinite(G).all():
            return None
        try:
            c = np.linalg.cholesky(G)
            X = np.linalg.solve(c.T, np.linalg.solve(c, W))
        except np.linalg.LinAlgError:
            try:
                X = np.linalg.solve(G, W)
            except np.linalg.LinAlgError:
                return None
        return A.T @ P @ A + Q - W.T @ X

    P = Q.copy()
    converged = False
    it = 0
    for it in range(1, int(max_iter) + 1):
        Pn = rhs(P)
        if Pn is None:
            return P, float("nan"), it, False
        gap = np.linalg.norm(Pn - P, "fro")
        P = 0.5 * (Pn + Pn.T)
        if not np.isfinite(gap):
            return P, float("nan"), it, False
        if gap <= tol:
            converged = True
            break
    final = rhs(P)
    if final is None:
        return P, float("nan"), it, False
    residual = float(np.linalg.norm(final - P, "fro"))
    return P, residual, it, converged


def spectral_norm(M):
    """Largest singular value of a dense matrix."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def sigma_linesearch(M0, D, f0, decrement, t0, armijo_c, max_halvings):
    """Backtracking line search on sigma_max along matrix direction D.

    Accepts the first t in {t0, t0/2, ...} with
    sigma_max(M0 + t*D) <= f0 - armijo_c * t * decrement.
    Returns (t, f_new, accepted); on rejection t and f_new refer to the
    last (smallest) trial step.
    """
    M0 = np.ascontiguousarray(M0, dtype=np.float64)
    D = np.ascontiguousarray(D, dtype=np.float64)
    t = float(t0)
    f = f0
    for _ in range(int(max_halvings) + 1):
        f = spectral_norm(M0 + t * D)
        if f <= f0 - armijo_c * t * decrement:
            return t, f, True
        t *= 0.5
    return t * 2.0, f, False


def linear_rollout(M, z0, steps):
    """Iterate z(k+1) = M z(k); returns array of shape (steps+1, dim)."""
    M = np.ascontiguousarray(M, dtype=np.float64)
    z = np.asarray(z0, dtype=np.float64).ravel()
    out = np.empty((int(steps) + 1, z.size))
    out[0] = z
    for k in range(int(steps)):
        z = M @ z
        out[k + 1] = z
    return out
