import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drfs.data import MultiPopulationData, PopulationDataset
from drfs.gradcheck import run_gradcheck
from drfs.objective import (ALPHA_MIN, Objective, ObjectiveConfig, aggregate_losses,
                            aggregate_weights, check_alpha, kernel_weights, population_loss,
                            regularizer)

from conftest import make_data


def single(n=1, m=3, mu=None, seed=0):
    rng = np.random.default_rng(seed)
    pop = PopulationDataset("A", rng.standard_normal((n, m)), rng.standard_normal(n))
    mu = rng.standard_normal(n) if mu is None else np.asarray(mu, dtype=float)
    return pop, mu


class TestLimits:
    @pytest.mark.parametrize("alpha", [[1e-6, 1e-6, 1e-6], [1.0, 2.0, 3.0], [1e6, 5.0, 1e-3]])
    def test_single_row_loss_is_minus_mu_squared(self, alpha):
        pop, mu = single(n=1)
        loss = population_loss(alpha, pop, mu, ObjectiveConfig(b=3, K=1), epoch=1)
        assert loss == -mu[0] ** 2

    def test_symmetric_mu_infinite_noise(self):
        pop, _ = single(n=40, m=3, seed=1)
        mu = np.where(np.arange(40) % 2 == 0, 1.0, -1.0)
        loss = population_loss(np.full(3, 1e6), pop, mu, ObjectiveConfig(b=5, K=None), epoch=1)
        assert abs(loss) < 1e-3

    def test_tiny_noise_recovers_mu(self):
        pop, mu = single(n=30, m=3, seed=2)
        loss = population_loss(np.full(3, ALPHA_MIN), pop, mu, ObjectiveConfig(b=2, K=None), epoch=1)
        assert loss == pytest.approx(-np.mean(mu**2), rel=1e-9)


class TestAggregation:
    def test_softmax_large_beta_matches_max(self):
        losses = np.array([-0.7, -0.2, -0.5])
        assert aggregate_losses(losses, 1e6) == pytest.approx(aggregate_losses(losses, math.inf), abs=1e-6)
        np.testing.assert_allclose(aggregate_weights(losses, 1e6), [0, 1, 0], atol=1e-6)

    def test_small_beta_tends_to_mean(self):
        losses = np.array([-0.7, -0.2, -0.5])
        assert aggregate_losses(losses, 1e-9) == pytest.approx(losses.mean(), abs=1e-8)

    def test_hardmax_tie_goes_to_first(self):
        np.testing.assert_array_equal(aggregate_weights([0.5, 0.5], math.inf), [1.0, 0.0])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(0.01, 20))
    def test_softmax_weights_are_derivative(self, losses, beta):
        losses = np.array(losses)
        w = aggregate_weights(losses, beta)
        h = 1e-6
        for p in range(losses.size):
            up, dn = losses.copy(), losses.copy()
            up[p] += h
            dn[p] -= h
            fd = (aggregate_losses(up, beta) - aggregate_losses(dn, beta)) / (2 * h)
            assert w[p] == pytest.approx(fd, abs=1e-5)


class TestRegularizer:
    def test_value_and_gradient(self):
        val, grad = regularizer(np.array([1.0, 3.0]))
        assert val == 0.25
        np.testing.assert_array_equal(grad, [-1 / 16, -1 / 16])

    def test_none(self):
        val, grad = regularizer(np.array([1.0, 3.0]), "none")
        assert val == 0.0 and not grad.any()


class TestObjective:
    def setup_method(self):
        self.data = make_data(sizes=(20, 15), m=3)
        self.mu = {p.id: np.tanh(p.y) for p in self.data.populations}

    def test_deterministic_per_epoch(self):
        obj = Objective(self.data, self.mu, ObjectiveConfig(b=3, K=None))
        a = obj.value(np.ones(3), epoch=2)
        b = obj.value(np.ones(3), epoch=2)
        c = obj.value(np.ones(3), epoch=3)
        np.testing.assert_array_equal(a.per_population_losses, b.per_population_losses)
        assert not np.array_equal(a.per_population_losses, c.per_population_losses)

    def test_total_is_aggregate_plus_penalty(self):
        cfg = ObjectiveConfig(b=2, K=None, lam=0.5)
        v = Objective(self.data, self.mu, cfg).value(np.array([1.0, 2.0, 1.0]), 1)
        assert v.total == pytest.approx(v.aggregate + 0.5 * 0.25)
        assert v.aggregate == v.per_population_losses.max()

    def test_K_cap_in_objective_but_strict_population_loss(self):
        pop = self.data.populations[1]
        with pytest.raises(ValueError, match="exceeds"):
            population_loss(np.ones(3), pop, self.mu[pop.id], ObjectiveConfig(K=100), 1)
        full = Objective(self.data, self.mu, ObjectiveConfig(b=2, K=None)).value(np.ones(3), 1)
        capped = Objective(self.data, self.mu, ObjectiveConfig(b=2, K=1000)).value(np.ones(3), 1)
        np.testing.assert_array_equal(full.per_population_losses, capped.per_population_losses)

    def test_truncation_close_to_full_when_K_large(self):
        alpha = np.full(3, 0.5)
        full = Objective(self.data, self.mu, ObjectiveConfig(b=2, K=None)).value(alpha, 1)
        trunc = Objective(self.data, self.mu, ObjectiveConfig(b=2, K=12)).value(alpha, 1)
        np.testing.assert_allclose(trunc.per_population_losses, full.per_population_losses, rtol=0.05)

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            check_alpha([1.0, 0.0])
        with pytest.raises(ValueError):
            check_alpha([1.0, np.nan])
        with pytest.raises(ValueError, match="entries"):
            Objective(self.data, self.mu, ObjectiveConfig()).value(np.ones(4), 1)

    def test_bad_mu_cache(self):
        mu = dict(self.mu)
        mu["P0"] = np.zeros(3)
        with pytest.raises(ValueError, match="shape"):
            Objective(self.data, mu, ObjectiveConfig())

    @pytest.mark.parametrize("bad", [dict(b=0), dict(K=0), dict(lam=-1), dict(beta=0), dict(reg_kind="l2")])
    def test_config_validation(self, bad):
        with pytest.raises(ValueError):
            ObjectiveConfig(**bad)


class TestGradient:
    @pytest.mark.parametrize("backend", ["python", None])
    def test_fd_check_full(self, backend):
        res = run_gradcheck(n_points=3, backend=backend)
        assert res.passed, res.errors

    def test_fd_check_truncated_softmax(self):
        res = run_gradcheck(n_points=3, obj_cfg=ObjectiveConfig(b=3, K=8, beta=2.0, lam=0.1))
        assert res.passed, res.errors

    def test_corrupted_gradient_fails(self):
        res = run_gradcheck(n_points=2, corrupt=lambda g: 1.1 * g)
        assert not res.passed

    def test_trivial_instance(self):
        res = run_gradcheck(n_pop=1, n=1, m=1, n_points=3)
        assert res.passed


class TestSpecExamples:
    def test_kernel_weight_values(self):
        np.testing.assert_allclose(kernel_weights([0.0], [1.0], [[0.0], [1.0]]), [0.62246, 0.37754], atol=1e-5)
        np.testing.assert_array_equal(kernel_weights([0.3, 1.0], [1.0, 2.0], [[5.0, 5.0]]), [1.0])
        np.testing.assert_allclose(kernel_weights([0.0], [1.0], [[2.0], [2.0]]), [0.5, 0.5])

    def test_softmax_value(self):
        assert aggregate_losses([-1.0, -3.0], 1.0) == pytest.approx(-1.2384, abs=1e-4)
        assert aggregate_losses([-1.0, -3.0], math.inf) == -1.0

    def test_tiny_alpha_well_separated(self):
        X = np.arange(5.0)[:, None] * np.array([[3.0, -2.0]])
        pop = PopulationDataset("A", X, np.zeros(5))
        mu = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
        loss = population_loss(np.full(2, 1e-4), pop, mu, ObjectiveConfig(b=4, K=2), epoch=1)
        assert loss == pytest.approx(-np.mean(mu**2), abs=1e-3)

    def test_population_order_and_mu_scaling(self):
        data = make_data(sizes=(20, 15, 12), m=3)
        mu = {p.id: np.sin(p.y) for p in data.populations}
        cfg = ObjectiveConfig(b=2, K=None, lam=0.2)
        alpha = np.array([0.5, 1.5, 1.0])
        base = Objective(data, mu, cfg).value(alpha, 1)
        flipped = data.with_populations(list(reversed(data.populations)))
        assert Objective(flipped, mu, cfg).value(alpha, 1).total == pytest.approx(base.total, abs=1e-15)
        scaled = Objective(data, {k: 3.0 * v for k, v in mu.items()}, cfg).value(alpha, 1)
        np.testing.assert_allclose(scaled.per_population_losses, 9.0 * base.per_population_losses, rtol=1e-12)

    def test_losses_bounded(self):
        data = make_data(sizes=(20, 15), m=3)
        mu = {p.id: p.y for p in data.populations}
        v = Objective(data, mu, ObjectiveConfig(b=3, K=5)).value(np.array([0.2, 3.0, 1.0]), 2)
        for p, loss in zip(data.populations, v.per_population_losses):
            assert -np.max(p.y**2) <= loss <= 0.0

    def test_taylor_remainder_is_second_order(self):
        data = make_data(sizes=(20, 15), m=3)
        mu = {p.id: np.tanh(p.y) for p in data.populations}
        obj = Objective(data, mu, ObjectiveConfig(b=2, K=None, beta=3.0, lam=0.1))
        alpha = np.array([0.7, 1.3, 2.0])
        f0, g = obj.evaluate(alpha, 1)
        d = np.random.default_rng(0).standard_normal(3)
        rem = [abs(obj.value(alpha + h * d, 1).total - f0.total - h * g @ d) for h in (1e-2, 5e-3, 2.5e-3)]
        assert rem[1] / rem[0] == pytest.approx(0.25, abs=0.05)
        assert rem[2] / rem[1] == pytest.approx(0.25, abs=0.05)

    def test_constant_feature_gradient_is_regularizer_only(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((15, 3))
        X[:, 2] = 0.7
        data = MultiPopulationData(["a", "b", "c"], [PopulationDataset("A", X, rng.standard_normal(15))])
        mu = {"A": rng.standard_normal(15)}
        cfg = ObjectiveConfig(b=2, K=None, lam=0.3)
        alpha = np.array([0.5, 1.0, 2.0])
        g = Objective(data, mu, cfg).gradient(alpha, 1)
        assert g[2] == pytest.approx(-0.3 / alpha.sum() ** 2, abs=1e-8)

    def test_single_row_zero_gradient_without_penalty(self):
        pop, mu = single(n=1, m=2)
        data = MultiPopulationData(["a", "b"], [pop])
        g = Objective(data, {"A": mu}, ObjectiveConfig(b=2, lam=0.0)).gradient(np.ones(2), 1)
        np.testing.assert_array_equal(g, 0.0)
