"""Comparison selectors: pooled Lasso, DRO-Lasso with multiplicative
population reweighting, and a uniformly random subset."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import MultiPopulationData, standardize


@dataclass(frozen=True)
class LassoModel:
    coef: np.ndarray
    intercept: float
    lambda_L: float
    converged: bool = True
    n_iter: int = 0

    def predict(self, X) -> np.ndarray:
        return np.asarray(X) @ self.coef + self.intercept


@dataclass
class PopulationWeights:
    w: np.ndarray
    eta: float
    iteration: int


def soft_threshold(x: float, t: float) -> float:
    # |x| within rounding of t counts as shrunk, so the zero-solution
    # threshold holds exactly at equality
    if abs(x) <= t * (1.0 + 1e-12):
        return 0.0
    return float(np.sign(x) * (abs(x) - t))


def _normalized_weights(n: int, sample_weights) -> np.ndarray:
    if sample_weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(sample_weights, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0) or not np.any(w > 0):
        raise ValueError("sample weights must be nonnegative, not all zero, one per row")
    return w / w.sum()


def lasso_objective(X, y, model: LassoModel, sample_weights=None) -> float:
    W = _normalized_weights(len(y), sample_weights)
    r = y - model.predict(X)
    return 0.5 * float(W @ (r * r)) + model.lambda_L * float(np.abs(model.coef).sum())


def lasso_fit(X, y, sample_weights=None, lambda_L: float = 0.01, tol: float = 1e-10,
              max_iter: int = 10000, coef_init=None, history: list | None = None) -> LassoModel:
    """Cyclic coordinate descent for

        min_β  1/(2 Σw) Σ_i w_i (y_i - b - x_iᵀβ)² + λ_L ‖β‖₁

    with the intercept b profiled out by weighted centering. Stops when the
    largest coordinate change in a sweep falls below ``tol``; ``converged`` is
    False if ``max_iter`` sweeps ran out first. ``history`` (if given) receives
    the objective after every sweep.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise ValueError("X must be N×m with N = len(y) >= 1")
    if lambda_L < 0:
        raise ValueError("lambda_L must be >= 0")
    W = _normalized_weights(X.shape[0], sample_weights)
    x_mean = W @ X
    y_mean = float(W @ y)
    Xc = X - x_mean
    yc = y - y_mean
    WXc = Xc * W[:, None]
    col_sq = np.einsum("ij,ij->j", WXc, Xc)
    beta = np.zeros(X.shape[1]) if coef_init is None else np.array(coef_init, dtype=np.float64)
    r = yc - Xc @ beta
    converged = False
    sweep = 0
    for sweep in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(X.shape[1]):
            if col_sq[j] <= 0.0:
                new = 0.0
            else:
                rho = float(WXc[:, j] @ r) + col_sq[j] * beta[j]
                new = soft_threshold(rho, lambda_L) / col_sq[j]
            change = new - beta[j]
            if change != 0.0:
                r -= change * Xc[:, j]
                beta[j] = new
                max_change = max(max_change, abs(change))
        if history is not None:
            history.append(0.5 * float(W @ (r * r)) + lambda_L * float(np.abs(beta).sum()))
        if max_change < tol:
            converged = True
            break
    return LassoModel(beta, y_mean - float(x_mean @ beta), float(lambda_L), converged, sweep)


def kkt_residual(X, y, model: LassoModel, sample_weights=None) -> float:
    """Largest violation of the Lasso optimality conditions."""
    W = _normalized_weights(len(y), sample_weights)
    grad = (W * (np.asarray(y) - model.predict(X))) @ np.asarray(X)
    lam = model.lambda_L
    active = model.coef != 0
    viol = np.where(
        active,
        np.abs(grad - lam * np.sign(model.coef)),
        np.maximum(np.abs(grad) - lam, 0.0),
    )
    return float(viol.max(initial=0.0))


def lasso_rank(model: LassoModel, k: int) -> list[int]:
    """k indices by descending |β|, ties by lower index."""
    m = model.coef.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}], got {k}")
    order = np.lexsort((np.arange(m), -np.abs(model.coef)))
    return [int(i) for i in order[:k]]


@dataclass
class DROLassoResult:
    model: LassoModel
    history: list[PopulationWeights] = field(default_factory=list)
    losses: list[np.ndarray] = field(default_factory=list)


def update_population_weights(w, losses, eta: float) -> np.ndarray:
    """w_p ← w_p·exp(η·loss_p), renormalized (shifted by the max for stability)."""
    w = np.asarray(w, dtype=np.float64)
    z = eta * np.asarray(losses, dtype=np.float64)
    new = w * np.exp(z - z.max())
    return new / new.sum()


def dro_lasso(data: MultiPopulationData, lambda_L: float = 0.01, eta: float = 0.1,
              T_max: int = 20, tol: float = 1e-10, max_iter: int = 10000) -> DROLassoResult:
    """Pooled Lasso refit T_max times under multiplicative population weights.

    Expects each population to be standardized already.
    """
    P = len(data.populations)
    X, y = data.pooled()
    pop_of_row = np.concatenate([np.full(p.n, i) for i, p in enumerate(data.populations)])
    w = np.full(P, 1.0 / P)
    result = DROLassoResult(model=None, history=[PopulationWeights(w.copy(), eta, 0)])
    coef = None
    for t in range(1, T_max + 1):
        model = lasso_fit(X, y, w[pop_of_row], lambda_L, tol, max_iter, coef_init=coef)
        coef = model.coef
        losses = np.array([np.mean((p.y - model.predict(p.X)) ** 2) for p in data.populations])
        w = update_population_weights(w, losses, eta)
        result.model = model
        result.losses.append(losses)
        result.history.append(PopulationWeights(w.copy(), eta, t))
    return result


def weights_to_csv(result: DROLassoResult, ids, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", *ids])
        for h in result.history:
            writer.writerow([h.iteration, *(float(v) for v in h.w)])


def random_select(m: int, k: int, seed: int) -> list[int]:
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}], got {k}")
    rng = np.random.default_rng([seed, 0x5E1EC7])
    return sorted(int(i) for i in rng.choice(m, size=k, replace=False))


def lasso_select(data: MultiPopulationData, k: int, lambda_L: float = 0.01) -> list[int]:
    """Vanilla baseline: pooled standardization, one Lasso fit, top-|β| features."""
    std, _ = standardize(data, "pooled")
    X, y = std.pooled()
    return lasso_rank(lasso_fit(X, y, lambda_L=lambda_L), k)


def dro_lasso_select(data: MultiPopulationData, k: int, lambda_L: float = 0.01,
                     eta: float = 0.1, T_max: int = 20) -> list[int]:
    std, _ = standardize(data, "per_population")
    return lasso_rank(dro_lasso(std, lambda_L, eta, T_max).model, k)
