"""Downstream harness: refit per-population predictors on a selected feature
subset and score them on held-out rows; aggregate over methods and seeds."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import DataError, MultiPopulationData, SplitBundle, fit_standardization, split_dataset
from .mu_model import KINDS, fit_conditional_mean, predict_mu

WORST = "worst"


@dataclass(frozen=True)
class DownstreamConfig:
    model_kind: str = "knn"
    k: int = 10
    penalty: float = 1e-3
    train_scope: str = "per_population"

    def __post_init__(self):
        if self.model_kind not in KINDS:
            raise ValueError(f"model_kind must be one of {KINDS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")
        if self.train_scope != "per_population":
            raise ValueError("train_scope must be 'per_population'")


@dataclass(frozen=True)
class PopulationMetrics:
    mse: float
    r2: float
    n_test: int


Metrics = dict  # population id -> PopulationMetrics


def _r2(mse: float, y_test: np.ndarray) -> float:
    var = float(np.var(y_test))
    return 1.0 - mse / var if var > 0 else float("nan")


def downstream_evaluate(splits: SplitBundle, selected, cfg: DownstreamConfig = DownstreamConfig()) -> Metrics:
    """Per population: standardize with downstream-train statistics, fit on
    the selected columns, report MSE (standardized target units) and R²."""
    selected = [int(i) for i in selected]
    if not selected:
        raise ValueError("selection is empty")
    m = splits.downstream_train.m
    if len(set(selected)) != len(selected) or not all(0 <= i < m for i in selected):
        raise ValueError(f"selected indices must be distinct and lie in [0, {m})")
    train = splits.downstream_train.select_columns(selected)
    test = splits.downstream_test.select_columns(selected)
    params = fit_standardization(train, "per_population")
    train, test = params.apply(train), params.apply(test)
    out = {}
    for p_train, p_test in zip(train.populations, test.populations):
        if p_test.n < 1:
            raise DataError(f"population {p_test.id!r} has no test rows")
        model = fit_conditional_mean(p_train, cfg.model_kind, k_mu=cfg.k, penalty=cfg.penalty)
        resid = p_test.y - predict_mu(model, p_test.X)
        mse = float(np.mean(resid * resid))
        out[p_test.id] = PopulationMetrics(mse, _r2(mse, p_test.y), p_test.n)
    return out


def worst_population(metrics: Metrics) -> PopulationMetrics:
    """Largest MSE and smallest R² across populations."""
    vals = list(metrics.values())
    return PopulationMetrics(
        max(v.mse for v in vals), min(v.r2 for v in vals), min(v.n_test for v in vals)
    )


def mean_metrics(items: list) -> Metrics:
    """Average several per-population metric dicts (e.g. over random draws)."""
    return {
        pid: PopulationMetrics(
            float(np.mean([it[pid].mse for it in items])),
            float(np.mean([it[pid].r2 for it in items])),
            items[0][pid].n_test,
        )
        for pid in items[0]
    }


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    population: str
    metric: str
    mean: float
    std: float
    n_seeds: int


@dataclass
class ComparisonTable:
    rows: list
    selections: dict  # method -> {seed: selected indices}
    cells: dict  # (method, seed) -> Metrics, worst included

    FIELDS = ("method", "population", "metric", "mean", "std", "n_seeds")

    def get(self, method: str, population: str = WORST, metric: str = "mse") -> ComparisonRow:
        for r in self.rows:
            if (r.method, r.population, r.metric) == (method, population, metric):
                return r
        raise KeyError((method, population, metric))

    def to_records(self) -> list[dict]:
        return [{f: getattr(r, f) for f in self.FIELDS} for r in self.rows]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.FIELDS)
            writer.writeheader()
            writer.writerows(self.to_records())

    def to_json(self) -> str:
        return json.dumps(self.to_records(), indent=2)


def _with_worst(metrics: Metrics) -> Metrics:
    metrics[WORST] = worst_population(metrics)
    return metrics


def evaluate_selection(splits: SplitBundle, selection, cfg: DownstreamConfig) -> Metrics:
    """Metrics including the worst-population entry. A selection is one index
    list, or a list of them whose metrics (worst included) are averaged."""
    if selection and isinstance(selection[0], (list, tuple)):
        return mean_metrics([_with_worst(downstream_evaluate(splits, s, cfg)) for s in selection])
    return _with_worst(downstream_evaluate(splits, selection, cfg))


def summarize(methods: list, seeds: list, cells: dict, ids: list) -> list:
    rows = []
    for method in methods:
        for pid in [*ids, WORST]:
            for metric in ("mse", "r2"):
                vals = np.array([getattr(cells[(method, s)][pid], metric) for s in seeds])
                rows.append(
                    ComparisonRow(method, pid, metric, float(vals.mean()), float(vals.std()), len(seeds))
                )
    return rows


def evaluate_seed(data: MultiPopulationData, k: int, methods: list, seed: int, selectors: dict,
                  cfg: DownstreamConfig = DownstreamConfig()):
    """One seed of the protocol: split, select per method, evaluate.

    Returns ``({method: Metrics with worst}, {method: selection})``.
    """
    splits = split_dataset(data, seed)
    cells, selections = {}, {}
    for method in methods:
        sel = selectors[method](splits.feature_selection, k, seed)
        cells[method] = evaluate_selection(splits, sel, cfg)
        selections[method] = sel
    return cells, selections


def compare_methods(data: MultiPopulationData, k: int, methods: list, seeds: list, selectors: dict,
                    cfg: DownstreamConfig = DownstreamConfig()) -> ComparisonTable:
    """For each (method, seed): split, select on the feature-selection part,
    evaluate downstream. Rows come out in method order, then population
    order with the worst-population summary last."""
    if not methods or not seeds:
        raise ValueError("need at least one method and one seed")
    missing = [mt for mt in methods if mt not in selectors]
    if missing:
        raise ValueError(f"unknown methods {missing}")
    cells, selections = {}, {}
    for seed in seeds:
        seed_cells, seed_sel = evaluate_seed(data, k, methods, seed, selectors, cfg)
        for method in methods:
            cells[(method, seed)] = seed_cells[method]
            selections.setdefault(method, {})[seed] = seed_sel[method]
    return ComparisonTable(summarize(methods, seeds, cells, data.ids), selections, cells)
