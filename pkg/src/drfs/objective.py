"""Kernel-smoothed worst-group surrogate for noise-relaxed feature selection.

For population p with rows X_j, frozen conditional means μ̂_j and per-feature
noise variances α, each Monte Carlo replicate noises every row,
``S_i = X_i + sqrt(α) ⊙ ε_i``, and smooths μ̂ with Gaussian posterior weights

    w_ij ∝ exp(-½ (X_j - S_i)ᵀ diag(α)⁻¹ (X_j - S_i)),

restricted to the K nearest rows of S_i. The population loss is
``-mean_{ℓ,i} (Σ_j w_ij μ̂_j)²``. Losses are combined across populations by a
hard max or a softmax-weighted sum, and ``λ / ‖α‖₁`` is added.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._backend import get_backend
from .data import MultiPopulationData, PopulationDataset, stable_key

ALPHA_MIN = 1e-6
REG_KINDS = ("reciprocal_l1", "none")


@dataclass(frozen=True)
class ObjectiveConfig:
    b: int = 10
    K: int | None = 1000
    beta: float = math.inf
    lam: float = 0.1
    reg_kind: str = "reciprocal_l1"
    seed: int = 0

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("b must be >= 1")
        if self.K is not None and self.K < 1:
            raise ValueError("K must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0 (inf for hard max)")
        if self.reg_kind not in REG_KINDS:
            raise ValueError(f"reg_kind must be one of {REG_KINDS}")


@dataclass(frozen=True)
class ObjectiveValue:
    per_population_losses: np.ndarray
    aggregate: float
    regularizer: float
    total: float


def check_alpha(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 1 or not np.all(np.isfinite(alpha)):
        raise ValueError("alpha must be a finite 1-D vector")
    if np.any(alpha < ALPHA_MIN):
        raise ValueError(f"alpha entries must be >= {ALPHA_MIN}")
    return alpha


def kernel_weights(S, alpha, X_rows) -> np.ndarray:
    """Normalized Gaussian posterior weights of ``X_rows`` given one noisy
    observation ``S`` (shifted by the largest exponent before exponentiating)."""
    X_rows = np.atleast_2d(np.asarray(X_rows, dtype=np.float64))
    D = X_rows - np.asarray(S, dtype=np.float64)[None, :]
    logits = -0.5 * np.sum(D * D / np.asarray(alpha, dtype=np.float64), axis=1)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def noise_stream(seed: int, epoch: int, pop_id: str, replicate: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, stable_key(pop_id), replicate])


def effective_k(K: int | None, n: int) -> int:
    return n if K is None else min(int(K), n)


class PopulationTerm:
    """One population's rows, μ̂ values and static neighbor index."""

    def __init__(self, pop: PopulationDataset, mu, K: int | None):
        mu = np.asarray(mu, dtype=np.float64)
        if mu.shape != (pop.n,):
            raise ValueError(f"mu cache for {pop.id!r} has shape {mu.shape}, expected ({pop.n},)")
        if not np.all(np.isfinite(mu)):
            raise ValueError(f"mu cache for {pop.id!r} has non-finite values")
        self.id = pop.id
        self.X = pop.X
        self.mu = mu
        self.k = effective_k(K, pop.n)
        self.tree = cKDTree(pop.X) if self.k < pop.n else None

    def neighbors(self, S: np.ndarray):
        if self.tree is None:
            return None
        _, idx = self.tree.query(S, k=self.k)
        return np.asarray(idx, dtype=np.intp).reshape(S.shape[0], self.k)

    def loss_and_grad(self, alpha, cfg: ObjectiveConfig, epoch: int, backend, with_grad=True):
        n, m = self.X.shape
        sqrt_a = np.sqrt(alpha)
        # running means over replicates: exact when every replicate agrees
        mean = 0.0
        grad = np.zeros(m) if with_grad else None
        for ell in range(cfg.b):
            eps = noise_stream(cfg.seed, epoch, self.id, ell).standard_normal((n, m))
            nbr = self.neighbors(self.X + sqrt_a * eps)
            sq, g = backend.replicate_terms(self.X, eps, alpha, self.mu, nbr, with_grad)
            mean += (sq / n - mean) / (ell + 1)
            if with_grad:
                grad += (g / n - grad) / (ell + 1)
        return -mean, (-grad if with_grad else None)


def population_loss(alpha, pop: PopulationDataset, mu, cfg: ObjectiveConfig, epoch: int,
                    backend: str | None = None) -> float:
    alpha = check_alpha(alpha)
    if cfg.K is not None and cfg.K > pop.n:
        raise ValueError(f"K={cfg.K} exceeds the {pop.n} rows of population {pop.id!r}")
    term = PopulationTerm(pop, mu, cfg.K)
    return term.loss_and_grad(alpha, cfg, epoch, get_backend(backend), with_grad=False)[0]


def aggregate_weights(losses, beta: float) -> np.ndarray:
    """Derivative of :func:`aggregate_losses` with respect to each loss."""
    losses = np.asarray(losses, dtype=np.float64)
    if math.isinf(beta):
        out = np.zeros_like(losses)
        out[int(np.argmax(losses))] = 1.0
        return out
    z = beta * losses
    sig = np.exp(z - z.max())
    sig /= sig.sum()
    agg = float(sig @ losses)
    return sig * (1.0 + beta * (losses - agg))


def aggregate_losses(losses, beta: float) -> float:
    """Hard max (beta = inf) or softmax(beta·L)-weighted sum of the losses."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size < 1:
        raise ValueError("need at least one loss")
    if math.isinf(beta):
        return float(losses.max())
    z = beta * losses
    sig = np.exp(z - z.max())
    sig /= sig.sum()
    return float(sig @ losses)


def regularizer(alpha, kind: str = "reciprocal_l1") -> tuple[float, np.ndarray]:
    alpha = np.asarray(alpha, dtype=np.float64)
    if kind == "none":
        return 0.0, np.zeros_like(alpha)
    if kind != "reciprocal_l1":
        raise ValueError(f"unknown regularizer {kind!r}")
    s = float(np.sum(alpha))
    return 1.0 / s, np.full_like(alpha, -1.0 / (s * s))


class Objective:
    """Surrogate over all populations, with neighbor indices built once."""

    def __init__(self, data: MultiPopulationData, mu_cache: dict, cfg: ObjectiveConfig,
                 backend: str | None = None):
        self.cfg = cfg
        self.ids = data.ids
        self.m = data.m
        self.terms = [PopulationTerm(p, mu_cache[p.id], cfg.K) for p in data.populations]
        self.backend = get_backend(backend)

    def evaluate(self, alpha, epoch: int, with_grad: bool = True):
        """Return ``(ObjectiveValue, gradient or None)`` from one shared noise draw."""
        alpha = check_alpha(alpha)
        if alpha.shape[0] != self.m:
            raise ValueError(f"alpha has {alpha.shape[0]} entries, expected {self.m}")
        losses = np.empty(len(self.terms))
        grads = []
        for i, term in enumerate(self.terms):
            losses[i], g = term.loss_and_grad(alpha, self.cfg, epoch, self.backend, with_grad)
            grads.append(g)
        agg = aggregate_losses(losses, self.cfg.beta)
        reg, reg_grad = regularizer(alpha, self.cfg.reg_kind)
        value = ObjectiveValue(losses, agg, reg, agg + self.cfg.lam * reg)
        if not with_grad:
            return value, None
        coef = aggregate_weights(losses, self.cfg.beta)
        grad = self.cfg.lam * reg_grad
        for c, g in zip(coef, grads):
            if c != 0.0:
                grad = grad + c * g
        return value, grad

    def value(self, alpha, epoch: int) -> ObjectiveValue:
        return self.evaluate(alpha, epoch, with_grad=False)[0]

    def gradient(self, alpha, epoch: int) -> np.ndarray:
        return self.evaluate(alpha, epoch)[1]


def total_objective(alpha, data_fs: MultiPopulationData, mu_cache: dict, cfg: ObjectiveConfig,
                    epoch: int, backend: str | None = None) -> ObjectiveValue:
    return Objective(data_fs, mu_cache, cfg, backend).value(alpha, epoch)


def objective_gradient(alpha, data_fs: MultiPopulationData, mu_cache: dict, cfg: ObjectiveConfig,
                       epoch: int, backend: str | None = None) -> np.ndarray:
    return Objective(data_fs, mu_cache, cfg, backend).gradient(alpha, epoch)
