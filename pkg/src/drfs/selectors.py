"""Feature selectors sharing one signature, ``select(fs_data, k, seed) -> indices``.

The main method standardizes the feature-selection split, fits μ̂ per
population, optimizes α and keeps the k least-noised features.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import dro_lasso_select, lasso_select, random_select
from .data import MultiPopulationData, standardize
from .mu_model import KINDS, build_mu_cache, fit_all
from .objective import ObjectiveConfig
from .optimizer import OptimizationTrace, OptimizerConfig, optimize, select_features

METHODS = ("drfs", "lasso", "dro_lasso", "random")


@dataclass(frozen=True)
class MuConfig:
    kind: str = "ridge"
    k_mu: int = 10
    penalty: float = 1e-3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"mu kind must be one of {KINDS}")
        if self.k_mu < 1:
            raise ValueError("k_mu must be >= 1")
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")

    def hyper(self) -> dict:
        return {"k_mu": self.k_mu} if self.kind == "knn" else {"penalty": self.penalty}


@dataclass(frozen=True)
class BaselineConfig:
    lambda_L: float = 0.01
    eta: float = 0.1
    T_max: int = 20
    random_draws: int = 10

    def __post_init__(self):
        if self.lambda_L < 0:
            raise ValueError("lambda_L must be >= 0")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.T_max < 1 or self.random_draws < 1:
            raise ValueError("T_max and random_draws must be >= 1")


@dataclass
class DRFSResult:
    alpha: np.ndarray
    trace: OptimizationTrace
    ranking: list[int] = field(default_factory=list)


def prepare_feature_selection(fs: MultiPopulationData) -> MultiPopulationData:
    """Standardize features and target within each population."""
    return standardize(fs, "per_population")[0]


def run_drfs(fs: MultiPopulationData, obj_cfg: ObjectiveConfig, opt_cfg: OptimizerConfig,
             mu_cfg: MuConfig = MuConfig(), seed: int | None = None, backend: str | None = None,
             callback=None) -> DRFSResult:
    """Optimize α on the feature-selection split. ``seed`` overrides the seeds
    in both configs."""
    if seed is not None:
        obj_cfg = replace(obj_cfg, seed=seed)
        opt_cfg = replace(opt_cfg, seed=seed)
    data = prepare_feature_selection(fs)
    mu_cache = build_mu_cache(fit_all(data, mu_cfg.kind, **mu_cfg.hyper()), data)
    alpha, trace = optimize(data, mu_cache, obj_cfg, opt_cfg, backend, callback)
    return DRFSResult(alpha, trace, select_features(alpha, data.m))


def make_selectors(obj_cfg: ObjectiveConfig = ObjectiveConfig(),
                   opt_cfg: OptimizerConfig = OptimizerConfig(), mu_cfg: MuConfig = MuConfig(),
                   base_cfg: BaselineConfig = BaselineConfig(), backend: str | None = None,
                   cache: dict | None = None) -> dict:
    """Selector callables keyed by method name.

    The α run depends only on (data, seed), so results are memoized in
    ``cache`` keyed by seed and reused across budgets.
    """
    cache = {} if cache is None else cache

    def drfs(fs, k, seed):
        if seed not in cache:
            cache[seed] = run_drfs(fs, obj_cfg, opt_cfg, mu_cfg, seed, backend)
        return cache[seed].ranking[:k]

    def lasso(fs, k, seed):
        return lasso_select(fs, k, base_cfg.lambda_L)

    def dro(fs, k, seed):
        return dro_lasso_select(fs, k, base_cfg.lambda_L, base_cfg.eta, base_cfg.T_max)

    def rand(fs, k, seed):
        # several subsets per seed; evaluation averages their metrics
        return [random_select(fs.m, k, 1000 * seed + r) for r in range(base_cfg.random_draws)]

    return {"drfs": drfs, "lasso": lasso, "dro_lasso": dro, "random": rand}
