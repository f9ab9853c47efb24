# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the iteration-heavy numerics.

Same signatures as lqconsensus._kernels_py; all inner loops run on
Fortran-ordered buffers through BLAS/LAPACK, so a full DARE value
iteration or spectral-norm line search costs one Python call.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm, dgemv
from scipy.linalg.cython_lapack cimport dgesdd, dgesv, dposv

cnp.import_array()


cdef void _mm(char ta, char tb, double[::1, :] A, double[::1, :] B,
              double[::1, :] C, double alpha, double beta) noexcept nogil:
    """C = alpha * op(A) @ op(B) + beta * C on Fortran-ordered views."""
    cdef int m = C.shape[0]
    cdef int n = C.shape[1]
    cdef int k = A.shape[1] if ta == b'N' else A.shape[0]
    cdef int lda = A.shape[0]
    cdef int ldb = B.shape[0]
    cdef int ldc = C.shape[0]
    dgemm(&ta, &tb, &m, &n, &k, &alpha, &A[0, 0], &lda,
          &B[0, 0], &ldb, &beta, &C[0, 0], &ldc)


cdef double _fro_gap(double[::1, :] X, double[::1, :] Y) noexcept nogil:
    cdef double acc = 0.0, d
    cdef Py_ssize_t i, j
    for j in range(X.shape[1]):
        for i in range(X.shape[0]):
            d = X[i, j] - Y[i, j]
            acc += d * d
    return sqrt(acc)


cdef int _solve_spd(double[::1, :] G, double[::1, :] X,
                    double[::1, :] Gwork, int* ipiv) noexcept nogil:
    """Solve G X = X in place (X holds RHS on entry, solution on exit).

    Cholesky first; general LU as the fallback when G is numerically
    indefinite. G is preserved, Gwork is scratch.
    """
    cdef int m = G.shape[0]
    cdef int nrhs = X.shape[1]
    cdef int info = 0
    cdef char lo = b'L'
    cdef Py_ssize_t i, j
    for j in range(m):
        for i in range(m):
            Gwork[i, j] = G[i, j]
    dposv(&lo, &m, &nrhs, &Gwork[0, 0], &m, &X[0, 0], &m, &info)
    if info == 0:
        return 0
    for j in range(m):
        for i in range(m):
            Gwork[i, j] = G[i, j]
    dgesv(&m, &nrhs, &Gwork[0, 0], &m, ipiv, &X[0, 0], &m, &info)
    return info


def dare_value_iteration(A, B, Q, R, double tol, long max_iter):
    """Fixed-point DARE iteration from P0 = Q; see the pure-python twin."""
    cdef double[::1, :] Af = np.asfortranarray(A, dtype=np.float64)
    cdef double[::1, :] Bf = np.asfortranarray(np.atleast_2d(B), dtype=np.float64)
    cdef double[::1, :] Qf = np.asfortranarray(Q, dtype=np.float64)
    cdef double[::1, :] Rf = np.asfortranarray(np.atleast_2d(R), dtype=np.float64)
    cdef int n = Af.shape[0]
    cdef int m = Bf.shape[1]

    P_arr = np.asfortranarray(Qf.copy())
    cdef double[::1, :] P = P_arr
    cdef double[::1, :] PA = np.zeros((n, n), order="F")
    cdef double[::1, :] PB = np.zeros((n, m), order="F")
    cdef double[::1, :] W = np.zeros((m, n), order="F")
    cdef double[::1, :] G = np.zeros((m, m), order="F")
    cdef double[::1, :] Gwork = np.zeros((m, m), order="F")
    cdef double[::1, :] X = np.zeros((m, n), order="F")
    cdef double[::1, :] Pn = np.zeros((n, n), order="F")
    ipiv_arr = np.zeros(m, dtype=np.intc)
    cdef int[::1] ipiv = ipiv_arr

    cdef long it = 0
    cdef bint converged = False
    cdef double gap = 0.0
    cdef double residual
    cdef int bad = 0
    cdef Py_ssize_t i, j

    with nogil:
        for it in range(1, max_iter + 1):
            bad = _dare_rhs(Af, Bf, Qf, Rf, P, PA, PB, W, G, Gwork, X, Pn, &ipiv[0])
            if bad != 0:
                break
            gap = _fro_gap(Pn, P)
            if not (gap == gap):  # NaN
                break
            for j in range(n):
                for i in range(n):
                    P[i, j] = 0.5 * (Pn[i, j] + Pn[j, i])
            if gap <= tol:
                converged = True
                break
        if bad == 0 and gap == gap:
            bad = _dare_rhs(Af, Bf, Qf, Rf, P, PA, PB, W, G, Gwork, X, Pn, &ipiv[0])

    if bad != 0 or gap != gap:
        return np.asarray(P_arr), float("nan"), int(it), False
    residual = _fro_gap(Pn, P)
    return np.ascontiguousarray(P_arr), float(residual), int(it), bool(converged)


cdef int _dare_rhs(double[::1, :] Af, double[::1, :] Bf, double[::1, :] Qf,
                   double[::1, :] Rf, double[::1, :] P,
                   double[::1, :] PA, double[::1, :] PB, double[::1, :] W,
                   double[::1, :] G, double[::1, :] Gwork, double[::1, :] X,
                   double[::1, :] Pn, int* ipiv) noexcept nogil:
    """Pn = A'PA + Q - (B'PA)' (R + B'PB)^-1 (B'PA)."""
    cdef int n = Af.shape[0]
    cdef int m = Bf.shape[1]
    cdef Py_ssize_t i, j
    cdef int info
    _mm(b'N', b'N', P, Af, PA, 1.0, 0.0)          # PA = P A
    _mm(b'T', b'N', Bf, PA, W, 1.0, 0.0)          # W = B' P A
    _mm(b'N', b'N', P, Bf, PB, 1.0, 0.0)          # PB = P B
    for j in range(m):
        for i in range(m):
            G[i, j] = Rf[i, j]
    _mm(b'T', b'N', Bf, PB, G, 1.0, 1.0)          # G = R + B' P B
    for j in range(n):
        for i in range(m):
            X[i, j] = W[i, j]
    info = _solve_spd(G, X, Gwork, ipiv)          # X = G^-1 W
    if info != 0:
        return info
    for j in range(n):
        for i in range(n):
            Pn[i, j] = Qf[i, j]
    _mm(b'T', b'N', Af, PA, Pn, 1.0, 1.0)         # Pn = Q + A' P A
    _mm(b'T', b'N', W, X, Pn, -1.0, 1.0)          # Pn -= W' X
    return 0


cdef double _sigma_max(double[::1, :] M, double[::1, :] scratch,
                       double[::1] sv, double[::1] work, int lwork,
                       int* iwork) noexcept nogil:
    """Largest singular value; scratch is overwritten with a copy of M."""
    cdef int mm = M.shape[0]
    cdef int nn = M.shape[1]
    cdef int info = 0
    cdef int one = 1
    cdef char jobz = b'N'
    cdef Py_ssize_t i, j
    for j in range(nn):
        for i in range(mm):
            scratch[i, j] = M[i, j]
    dgesdd(&jobz, &mm, &nn, &scratch[0, 0], &mm, &sv[0],
           NULL, &one, NULL, &one, &work[0], &lwork, iwork, &info)
    if info != 0:
        return -1.0
    return sv[0]


cdef int _svd_workspace(int m, int n) noexcept:
    # dgesdd jobz='N' lwork lower bound, padded generously.
    cdef int mn = m if m < n else n
    cdef int mx = m if m > n else n
    return 3 * mn + mx + 32 * mn + 64


def spectral_norm(M):
    """Largest singular value of a dense matrix."""
    arr = np.asfortranarray(np.atleast_2d(M), dtype=np.float64)
    if arr.size == 0:
        return 0.0
    cdef double[::1, :] Mf = arr
    cdef int m = Mf.shape[0]
    cdef int n = Mf.shape[1]
    cdef int lwork = _svd_workspace(m, n)
    cdef double[::1, :] scratch = np.zeros((m, n), order="F")
    cdef double[::1] sv = np.zeros(min(m, n))
    cdef double[::1] work = np.zeros(lwork)
    iwork_arr = np.zeros(8 * min(m, n) + 8, dtype=np.intc)
    cdef int[::1] iwork = iwork_arr
    cdef double s
    with nogil:
        s = _sigma_max(Mf, scratch, sv, work, lwork, &iwork[0])
    if s < 0.0:
        raise RuntimeError("SVD failed to converge")
    return float(s)


def sigma_linesearch(M0, D, double f0, double decrement, double t0,
                     double armijo_c, long max_halvings):
    """Backtracking Armijo search on sigma_max along matrix direction D."""
    cdef double[::1, :] Mf = np.asfortranarray(M0, dtype=np.float64)
    cdef double[::1, :] Df = np.asfortranarray(D, dtype=np.float64)
    cdef int m = Mf.shape[0]
    cdef int n = Mf.shape[1]
    cdef int lwork = _svd_workspace(m, n)
    cdef double[::1, :] trial = np.zeros((m, n), order="F")
    cdef double[::1, :] scratch = np.zeros((m, n), order="F")
    cdef double[::1] sv = np.zeros(min(m, n))
    cdef double[::1] work = np.zeros(lwork)
    iwork_arr = np.zeros(8 * min(m, n) + 8, dtype=np.intc)
    cdef int[::1] iwork = iwork_arr

    cdef double t = t0
    cdef double f = f0
    cdef bint accepted = False
    cdef bint failed = False
    cdef long h
    cdef Py_ssize_t i, j
    with nogil:
        for h in range(max_halvings + 1):
            for j in range(n):
                for i in range(m):
                    trial[i, j] = Mf[i, j] + t * Df[i, j]
            f = _sigma_max(trial, scratch, sv, work, lwork, &iwork[0])
            if f < 0.0:
                failed = True
                break
            if f <= f0 - armijo_c * t * decrement:
                accepted = True
                break
            t *= 0.5
    if failed:
        raise RuntimeError("SVD failed to converge during line search")
    if accepted:
        return float(t), float(f), True
    return float(t * 2.0), float(f), False


def linear_rollout(M, z0, long steps):
    """Iterate z(k+1) = M z(k); returns (steps+1, dim) array."""
    cdef double[::1, :] Mf = np.asfortranarray(np.atleast_2d(M), dtype=np.float64)
    z_arr = np.array(z0, dtype=np.float64).ravel().copy()
    cdef int n = Mf.shape[0]
    out_arr = np.zeros((steps + 1, n))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] z = z_arr
    cdef double[::1] zn = np.zeros(n)
    cdef char tn = b'N'
    cdef int incx = 1
    cdef double one = 1.0, zero = 0.0
    cdef long k
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[0, i] = z[i]
        for k in range(steps):
            dgemv(&tn, &n, &n, &one, &Mf[0, 0], &n, &z[0], &incx,
                  &zero, &zn[0], &incx)
            for i in range(n):
                z[i] = zn[i]
                out[k + 1, i] = zn[i]
    return out_arr
