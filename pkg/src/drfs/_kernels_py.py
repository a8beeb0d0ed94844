"""Pure NumPy implementation of the per-replicate smoothing kernel.

Used when the compiled extension is unavailable, and as a cross-check for it.
"""
from __future__ import annotations

import numpy as np

NAME = "python"


def replicate_terms(X, eps, alpha, mu, nbr=None, with_grad=True, chunk=256):
    """Sum of squared kernel-smoothed means for one noise replicate.

    Each row ``i`` is noised as ``S_i = X_i + sqrt(alpha) * eps_i`` and
    ``m_i = sum_j w_ij mu_j`` with Gaussian weights
    ``w_ij ∝ exp(-0.5 * sum_d (X_jd - S_id)**2 / alpha_d)`` over all rows
    (``nbr is None``) or over the rows listed in ``nbr[i]``.

    Returns ``(sum_i m_i**2, gradient of that sum w.r.t. alpha)``; the gradient
    is ``None`` when ``with_grad`` is false.
    """
    X = np.asarray(X, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    inv_s = 1.0 / np.sqrt(alpha)
    Xs = X * inv_s
    Ss = Xs + eps
    if nbr is None:
        logits = Ss @ Xs.T
        logits -= 0.5 * np.einsum("ij,ij->i", Xs, Xs)[None, :]
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits, out=logits)
        w /= w.sum(axis=1, keepdims=True)
        m = w @ mu
        sq = float(m @ m)
        if not with_grad:
            return sq, None
        c = w
        c *= mu[None, :] - m[:, None]
        G1 = c @ Xs
        G2 = c @ (Xs * Xs)
        # sum_j c_ij = 0, so the row-constant part of (Xs_j - Ss_i)^2 drops out
        dm = G2 - G1 * (2.0 * Xs + eps)
        return sq, (m @ dm) / alpha

    nbr = np.asarray(nbr, dtype=np.intp)
    n, m_feat = X.shape
    m_all = np.empty(n)
    grad = np.zeros(m_feat)
    for start in range(0, n, chunk):
        rows = slice(start, start + chunk)
        D = Xs[nbr[rows]] - Ss[rows, None, :]
        logits = -0.5 * np.einsum("ikd,ikd->ik", D, D)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=1, keepdims=True)
        mu_n = mu[nbr[rows]]
        mr = np.einsum("ik,ik->i", w, mu_n)
        m_all[rows] = mr
        if with_grad:
            c = w * (mu_n - mr[:, None])
            acc = np.einsum("ik,ikd->id", c, D * (D + eps[rows, None, :]))
            grad += mr @ acc
    sq = float(m_all @ m_all)
    if not with_grad:
        return sq, None
    return sq, grad / alpha
