"""Central finite-difference check of the analytic objective gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MultiPopulationData, PopulationDataset
from .mu_model import build_mu_cache, fit_all
from .objective import Objective, ObjectiveConfig

DEFAULT_TOL = 1e-4


@dataclass
class GradcheckResult:
    max_rel_error: float
    errors: list[float]
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def small_instance(n_pop: int = 3, n: int = 20, m: int = 5, seed: int = 0) -> MultiPopulationData:
    """Random nonlinear multi-population problem sized for gradient checks."""
    rng = np.random.default_rng([seed, 7])
    pops = []
    for p in range(n_pop):
        X = rng.standard_normal((n, m))
        w = rng.standard_normal(m)
        y = np.tanh(X @ w) + 0.5 * X[:, p % m] ** 2 + 0.1 * rng.standard_normal(n)
        pops.append(PopulationDataset(f"P{p}", X, y))
    return MultiPopulationData([f"x{i}" for i in range(m)], pops, "y")


def relative_error(analytic, numeric) -> float:
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    floor = 1e-8 * max(np.abs(analytic).max(initial=0.0), 1e-300)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def fd_log_gradient(objective: Objective, alpha, epoch: int, h: float = 1e-4) -> np.ndarray:
    """d total / d log α by central differences, reusing the epoch's noise draw."""
    alpha = np.asarray(alpha, dtype=np.float64)
    out = np.empty_like(alpha)
    for d in range(alpha.size):
        up = alpha.copy()
        dn = alpha.copy()
        up[d] *= np.exp(h)
        dn[d] *= np.exp(-h)
        out[d] = (objective.value(up, epoch).total - objective.value(dn, epoch).total) / (2 * h)
    return out


def check_gradient(objective: Objective, alphas, epoch: int = 1, h: float = 1e-4,
                   tol: float = DEFAULT_TOL, corrupt=None) -> GradcheckResult:
    """Compare α ⊙ ∇f against finite differences in log α at each point.

    ``corrupt`` optionally maps the analytic gradient before comparison
    (used to confirm the check can fail).
    """
    errors = []
    for alpha in alphas:
        grad = objective.gradient(alpha, epoch)
        if corrupt is not None:
            grad = corrupt(grad)
        errors.append(relative_error(alpha * grad, fd_log_gradient(objective, alpha, epoch, h)))
    return GradcheckResult(max(errors), errors, tol)


def run_gradcheck(n_pop=3, n=20, m=5, n_points=10, seed=0, obj_cfg: ObjectiveConfig | None = None,
                  low=0.1, high=5.0, backend=None, corrupt=None, tol=DEFAULT_TOL) -> GradcheckResult:
    data = small_instance(n_pop, n, m, seed)
    mu_cache = build_mu_cache(fit_all(data, "knn", k_mu=min(3, n)), data)
    obj_cfg = obj_cfg or ObjectiveConfig(b=4, seed=seed)
    objective = Objective(data, mu_cache, obj_cfg, backend)
    rng = np.random.default_rng([seed, 11])
    alphas = [rng.uniform(low, high, m) for _ in range(n_points)]
    return check_gradient(objective, alphas, corrupt=corrupt, tol=tol)
