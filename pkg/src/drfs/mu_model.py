"""Per-population estimators of E[Y | X], fitted once and then frozen."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import DataError, MultiPopulationData, PopulationDataset

KINDS = ("knn", "ridge")


@dataclass(frozen=True)
class ConditionalMeanModel:
    kind: str
    hyper: dict
    X_train: np.ndarray | None = None
    y_train: np.ndarray | None = None
    coef: np.ndarray | None = None
    intercept: float = 0.0
    n_features: int = field(default=0)

    def predict(self, X) -> np.ndarray:
        return predict_mu(self, X)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "hyper": dict(self.hyper), "n_features": self.n_features}
        if self.kind == "knn":
            out["X_train"] = self.X_train.tolist()
            out["y_train"] = self.y_train.tolist()
        else:
            out["coef"] = self.coef.tolist()
            out["intercept"] = self.intercept
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "ConditionalMeanModel":
        if doc["kind"] == "knn":
            return cls(
                "knn",
                dict(doc["hyper"]),
                X_train=_frozen(np.asarray(doc["X_train"], dtype=float)),
                y_train=_frozen(np.asarray(doc["y_train"], dtype=float)),
                n_features=int(doc["n_features"]),
            )
        return cls(
            "ridge",
            dict(doc["hyper"]),
            coef=_frozen(np.asarray(doc["coef"], dtype=float)),
            intercept=float(doc["intercept"]),
            n_features=int(doc["n_features"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ConditionalMeanModel":
        return cls.from_dict(json.loads(text))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def ridge_solve(X: np.ndarray, y: np.ndarray, penalty: float) -> tuple[np.ndarray, float]:
    """Ridge with an unpenalized intercept: centers X and y, then solves
    (XcᵀXc + penalty·I) β = Xcᵀyc."""
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    A = Xc.T @ Xc + penalty * np.eye(X.shape[1])
    rhs = Xc.T @ yc
    try:
        coef = np.linalg.solve(A, rhs)
        if not np.all(np.isfinite(coef)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        coef = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return coef, y_mean - float(x_mean @ coef)


def fit_conditional_mean(
    pop: PopulationDataset, kind: str = "knn", k_mu: int | None = 10, penalty: float = 1e-3
) -> ConditionalMeanModel:
    """Fit μ̂ for one population. For knn, ``k_mu`` is capped at n_p."""
    if kind == "knn":
        k = pop.n if k_mu is None else min(int(k_mu), pop.n)
        if k < 1:
            raise DataError("k_mu must be at least 1")
        return ConditionalMeanModel(
            "knn", {"k_mu": k}, X_train=_frozen(pop.X), y_train=_frozen(pop.y),
            n_features=pop.X.shape[1],
        )
    if kind == "ridge":
        if pop.n < 2:
            raise DataError(f"ridge needs at least 2 rows, population {pop.id!r} has {pop.n}")
        coef, intercept = ridge_solve(pop.X, pop.y, float(penalty))
        return ConditionalMeanModel(
            "ridge", {"penalty": float(penalty)}, coef=_frozen(coef), intercept=intercept,
            n_features=pop.X.shape[1],
        )
    raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")


def knn_indices(X_train: np.ndarray, X_query: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Indices of the k nearest training rows (Euclidean), ties by lower index."""
    sq_train = np.einsum("ij,ij->i", X_train, X_train)
    out = np.empty((X_query.shape[0], k), dtype=np.intp)
    for start in range(0, X_query.shape[0], chunk):
        Q = X_query[start : start + chunk]
        d2 = np.einsum("ij,ij->i", Q, Q)[:, None] - 2.0 * Q @ X_train.T + sq_train[None, :]
        # exact-distance ties must resolve by index; the stable sort guarantees it
        out[start : start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def predict_mu(model: ConditionalMeanModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} columns, got {X.shape[1]}")
    if model.kind == "knn":
        idx = knn_indices(model.X_train, X, model.hyper["k_mu"])
        return model.y_train[idx].mean(axis=1)
    return X @ model.coef + model.intercept


def fit_all(data: MultiPopulationData, kind: str = "knn", **hyper) -> dict[str, ConditionalMeanModel]:
    return {p.id: fit_conditional_mean(p, kind, **hyper) for p in data.populations}


def build_mu_cache(models: dict, data: MultiPopulationData) -> dict[str, np.ndarray]:
    """μ̂_p evaluated at every row of population p, keyed by population id."""
    cache = {}
    for p in data.populations:
        if p.id not in models:
            raise DataError(f"no fitted model for population {p.id!r}")
        values = predict_mu(models[p.id], p.X)
        values.setflags(write=False)
        cache[p.id] = values
    return cache
