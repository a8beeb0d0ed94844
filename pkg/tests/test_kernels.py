"""Smoothing-kernel backends: agreement with each other and with a
brute-force evaluation of the normalized Gaussian weights."""
import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drfs._backend import BACKENDS, get_backend
from drfs._kernels_py import replicate_terms as py_terms
from drfs.objective import kernel_weights

BACKEND_NAMES = sorted(BACKENDS)


def brute_weights(S, alpha, X_rows, dps=50):
    mpmath.mp.dps = dps
    logs = [
        -mpmath.mpf(1) / 2 * mpmath.fsum((mpmath.mpf(x) - mpmath.mpf(s)) ** 2 / mpmath.mpf(a)
                                          for x, s, a in zip(row, S, alpha))
        for row in X_rows
    ]
    ex = [mpmath.exp(v) for v in logs]
    tot = mpmath.fsum(ex)
    return np.array([float(e / tot) for e in ex])


def brute_replicate(X, eps, alpha, mu, nbr=None):
    """Direct loop over rows: m_i and sum m_i**2 (float64)."""
    S = X + np.sqrt(alpha) * eps
    m = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        rows = np.arange(X.shape[0]) if nbr is None else nbr[i]
        w = kernel_weights(S[i], alpha, X[rows])
        m[i] = w @ mu[rows]
    return float(m @ m)


class TestKernelWeights:
    def test_matches_mpmath(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            r, m = rng.integers(1, 30), rng.integers(1, 8)
            X = rng.standard_normal((r, m)) * 3
            S = rng.standard_normal(m)
            alpha = rng.uniform(0.05, 4, m)
            np.testing.assert_allclose(kernel_weights(S, alpha, X), brute_weights(S, alpha, X),
                                       rtol=0, atol=1e-12)

    def test_extreme_exponents(self):
        # every naive exp underflows to 0 here
        X = np.array([[100.0], [101.0], [103.0]])
        S = np.array([0.0])
        alpha = np.array([1e-2])
        with np.errstate(under="ignore"):
            assert np.all(np.exp(-0.5 * (X[:, 0] - S[0]) ** 2 / alpha[0]) == 0.0)
        w = kernel_weights(S, alpha, X)
        np.testing.assert_allclose(w, brute_weights(S, alpha, X), rtol=0, atol=1e-12)
        assert w[0] == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 5), st.integers(0, 10_000), st.floats(-50, 50))
    def test_probability_vector_and_shift_invariance(self, r, m, seed, shift):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((r, m))
        S = rng.standard_normal(m)
        alpha = rng.uniform(0.1, 3, m)
        w = kernel_weights(S, alpha, X)
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(kernel_weights(S + shift, alpha, X + shift), w, atol=1e-9)


def _instance(n=25, m=4, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((n, m)), rng.standard_normal((n, m)),
            rng.uniform(0.2, 3.0, m), rng.standard_normal(n))


@pytest.mark.parametrize("name", BACKEND_NAMES)
class TestReplicateTerms:
    def test_full_matches_brute_force(self, name):
        X, eps, alpha, mu = _instance()
        sq, _ = get_backend(name).replicate_terms(X, eps, alpha, mu, None, with_grad=False)
        assert sq == pytest.approx(brute_replicate(X, eps, alpha, mu), rel=1e-11)

    def test_truncated_matches_brute_force(self, name):
        X, eps, alpha, mu = _instance(seed=1)
        nbr = np.argsort(np.random.default_rng(2).random((X.shape[0], X.shape[0])), axis=1)[:, :7]
        sq, _ = get_backend(name).replicate_terms(X, eps, alpha, mu, nbr, with_grad=False)
        assert sq == pytest.approx(brute_replicate(X, eps, alpha, mu, nbr), rel=1e-11)

    def test_all_neighbors_equals_full(self, name):
        X, eps, alpha, mu = _instance(seed=3)
        be = get_backend(name)
        nbr = np.tile(np.arange(X.shape[0]), (X.shape[0], 1))
        sq_f, g_f = be.replicate_terms(X, eps, alpha, mu, None)
        sq_t, g_t = be.replicate_terms(X, eps, alpha, mu, nbr)
        assert sq_t == pytest.approx(sq_f, rel=1e-12)
        np.testing.assert_allclose(g_t, g_f, rtol=1e-9, atol=1e-12)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
@pytest.mark.parametrize("truncated", [False, True])
def test_backends_agree(truncated):
    X, eps, alpha, mu = _instance(n=60, m=6, seed=4)
    nbr = None
    if truncated:
        d = ((X[:, None, :] - (X + np.sqrt(alpha) * eps)[None]) ** 2).sum(-1).T
        nbr = np.argsort(d, axis=1, kind="stable")[:, :15]
    sq_p, g_p = py_terms(X, eps, alpha, mu, nbr)
    sq_c, g_c = BACKENDS["cython"].replicate_terms(X, eps, alpha, mu, nbr)
    assert sq_c == pytest.approx(sq_p, rel=1e-12)
    np.testing.assert_allclose(g_c, g_p, rtol=1e-9, atol=1e-13)


def test_unknown_backend():
    with pytest.raises(ValueError, match="unavailable"):
        get_backend("fortran")
