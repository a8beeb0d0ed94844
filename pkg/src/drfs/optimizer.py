"""Adam on the noise variances with cosine annealing and projection onto
α ≥ ALPHA_MIN; ranking of the optimized variances."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .objective import ALPHA_MIN, Objective, ObjectiveConfig


@dataclass(frozen=True)
class OptimizerConfig:
    epochs: int = 200
    learning_rate: float = 0.1
    lr_schedule: str = "cosine"
    lr_min: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_center: float = 1.0
    init_noise_std: float = 0.01
    seed: int = 0
    snapshot_every: int = 10

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ValueError("lr_schedule must be 'cosine' or 'constant'")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    losses: np.ndarray
    aggregate: float
    regularizer: float
    total: float
    alpha: np.ndarray | None = None


@dataclass
class OptimizationTrace:
    population_ids: list[str]
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def aggregates(self) -> np.ndarray:
        return np.array([r.aggregate for r in self.records])

    def snapshots(self) -> dict[int, np.ndarray]:
        return {r.epoch: r.alpha for r in self.records if r.alpha is not None}

    def rows(self) -> list[dict]:
        out = []
        for r in self.records:
            row = {"epoch": r.epoch, "lr": r.lr}
            row.update({f"loss_{pid}": float(v) for pid, v in zip(self.population_ids, r.losses)})
            row.update(aggregate=r.aggregate, regularizer=r.regularizer, total=r.total)
            out.append(row)
        return out

    def to_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


def init_alpha(m: int, cfg: OptimizerConfig) -> np.ndarray:
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng([cfg.seed, 0x0A1FA])
    alpha = cfg.init_center + cfg.init_noise_std * rng.standard_normal(m)
    return np.maximum(alpha, ALPHA_MIN)


def cosine_lr(t: int, cfg: OptimizerConfig) -> float:
    if cfg.lr_schedule == "constant":
        return cfg.learning_rate
    t_max = cfg.epochs
    if not 0 <= t <= t_max:
        raise ValueError(f"t must lie in [0, {t_max}]")
    return cfg.lr_min + 0.5 * (cfg.learning_rate - cfg.lr_min) * (1.0 + math.cos(math.pi * t / t_max))


def adam_step(state: AdamState, grad, lr: float, cfg: OptimizerConfig):
    """One bias-corrected Adam step. Returns (delta to add to α, new state)."""
    grad = np.asarray(grad, dtype=np.float64)
    t = state.t + 1
    m = cfg.adam_beta1 * state.m + (1 - cfg.adam_beta1) * grad
    v = cfg.adam_beta2 * state.v + (1 - cfg.adam_beta2) * grad * grad
    m_hat = m / (1 - cfg.adam_beta1**t)
    v_hat = v / (1 - cfg.adam_beta2**t)
    delta = -lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return delta, AdamState(m, v, t)


def project(alpha) -> np.ndarray:
    return np.maximum(alpha, ALPHA_MIN)


def optimize(data_fs, mu_cache, obj_cfg: ObjectiveConfig, opt_cfg: OptimizerConfig,
             backend: str | None = None, callback=None):
    """Full-batch Adam over ``opt_cfg.epochs`` epochs. Returns (α, trace)."""
    objective = Objective(data_fs, mu_cache, obj_cfg, backend)
    alpha = init_alpha(data_fs.m, opt_cfg)
    state = AdamState.zeros(data_fs.m)
    trace = OptimizationTrace(data_fs.ids)
    last = opt_cfg.epochs
    for epoch in range(1, last + 1):
        lr = cosine_lr(epoch - 1, opt_cfg)
        value, grad = objective.evaluate(alpha, epoch)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite gradient at epoch {epoch}")
        delta, state = adam_step(state, grad, lr, opt_cfg)
        alpha = project(alpha + delta)
        keep = epoch == 1 or epoch == last or epoch % opt_cfg.snapshot_every == 0
        trace.records.append(
            EpochRecord(epoch, lr, value.per_population_losses.copy(), value.aggregate,
                        value.regularizer, value.total, alpha.copy() if keep else None)
        )
        if callback is not None:
            callback(epoch, alpha, value)
    return alpha, trace


def select_features(alpha, k: int) -> list[int]:
    """Indices of the k smallest α, ascending by α then by index."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if not 1 <= k <= alpha.shape[0]:
        raise ValueError(f"k must lie in [1, {alpha.shape[0]}], got {k}")
    order = np.lexsort((np.arange(alpha.shape[0]), alpha))
    return [int(i) for i in order[:k]]


def alpha_to_json(alpha, feature_names=None) -> str:
    doc = {"alpha": [float(a) for a in alpha]}
    if feature_names is not None:
        doc["feature_names"] = list(feature_names)
    return json.dumps(doc, indent=2)
