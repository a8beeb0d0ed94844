# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-replicate smoothing kernel. Same contract as ``_kernels_py``."""
import numpy as np

from libc.math cimport exp, INFINITY

NAME = "cython"


cdef void _shift_rows(double[:, ::1] C, const double[::1] halfq) noexcept nogil:
    # C holds Ss @ Xs.T on entry; on exit the row-max-shifted logits
    cdef Py_ssize_t n = C.shape[0], K = C.shape[1], i, j
    cdef double mx, v
    for i in range(n):
        mx = -INFINITY
        for j in range(K):
            v = C[i, j] - halfq[j]
            C[i, j] = v
            if v > mx:
                mx = v
        for j in range(K):
            C[i, j] -= mx


cdef void _center_rows(double[:, ::1] C, const double[::1] mu, double[::1] mout,
                       bint center) noexcept nogil:
    # C holds unnormalized weights; on exit c_ij = w_ij * (mu_j - m_i) if center
    cdef Py_ssize_t n = C.shape[0], K = C.shape[1], i, j
    cdef double s, t, mi, inv
    for i in range(n):
        s = 0.0
        t = 0.0
        for j in range(K):
            s += C[i, j]
            t += C[i, j] * mu[j]
        mi = t / s
        mout[i] = mi
        if center:
            inv = 1.0 / s
            for j in range(K):
                C[i, j] = C[i, j] * inv * (mu[j] - mi)


cdef void _truncated(const double[:, ::1] Xs, const double[:, ::1] Ss, const double[:, ::1] eps,
                     const double[::1] mu, const Py_ssize_t[:, ::1] nbr, bint with_grad,
                     double[::1] mout, double[::1] grad, double[::1] ebuf,
                     double[::1] acc) noexcept nogil:
    cdef Py_ssize_t n = Xs.shape[0], m = Xs.shape[1], K = nbr.shape[1]
    cdef Py_ssize_t i, k, j, d
    cdef double mx, v, D, s, t, mi, c
    for i in range(n):
        mx = -INFINITY
        for k in range(K):
            j = nbr[i, k]
            v = 0.0
            for d in range(m):
                D = Xs[j, d] - Ss[i, d]
                v += D * D
            v = -0.5 * v
            ebuf[k] = v
            if v > mx:
                mx = v
        s = 0.0
        t = 0.0
        for k in range(K):
            v = exp(ebuf[k] - mx)
            ebuf[k] = v
            s += v
            t += v * mu[nbr[i, k]]
        mi = t / s
        mout[i] = mi
        if not with_grad:
            continue
        for d in range(m):
            acc[d] = 0.0
        for k in range(K):
            if ebuf[k] == 0.0:
                continue
            j = nbr[i, k]
            c = ebuf[k] / s * (mu[j] - mi)
            for d in range(m):
                D = Xs[j, d] - Ss[i, d]
                acc[d] += c * D * (D + eps[i, d])
        for d in range(m):
            grad[d] += mi * acc[d]


def replicate_terms(X, eps, alpha, mu, nbr=None, with_grad=True):
    """Sum of squared kernel-smoothed means for one noise replicate, and its
    gradient with respect to ``alpha`` (``None`` when ``with_grad`` is false)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    eps_a = np.ascontiguousarray(eps, dtype=np.float64)
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    mu_a = np.ascontiguousarray(mu, dtype=np.float64)
    inv_s = 1.0 / np.sqrt(alpha)
    Xs = X * inv_s
    Ss = Xs + eps_a
    n = X.shape[0]
    mvals = np.empty(n)
    cdef double sq = 0.0
    cdef double[::1] mv = mvals
    cdef Py_ssize_t i

    if nbr is None:
        C = np.ascontiguousarray(Ss @ Xs.T)
        halfq = 0.5 * np.einsum("ij,ij->i", Xs, Xs)
        _shift_rows(C, halfq)
        np.exp(C, out=C)
        _center_rows(C, mu_a, mvals, with_grad)
        for i in range(n):
            sq += mv[i] * mv[i]
        if not with_grad:
            return sq, None
        G = C @ np.hstack([Xs, Xs * Xs])
        m = X.shape[1]
        dm = G[:, m:] - G[:, :m] * (2.0 * Xs + eps_a)
        return sq, (mvals @ dm) / alpha

    nbr_a = np.ascontiguousarray(nbr, dtype=np.intp)
    grad = np.zeros(X.shape[1])
    ebuf = np.empty(nbr_a.shape[1])
    acc = np.empty(X.shape[1])
    _truncated(Xs, Ss, eps_a, mu_a, nbr_a, with_grad, mvals, grad, ebuf, acc)
    for i in range(n):
        sq += mv[i] * mv[i]
    if not with_grad:
        return sq, None
    return sq, grad / alpha
