"""Multi-population datasets: CSV ingestion, standardization, splitting and
the synthetic benchmark generators."""
from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


class SchemaError(DataError):
    """A required column is missing from the input."""


def stable_key(text: str) -> int:
    """Platform-independent integer key for a string (used to key RNG streams)."""
    return zlib.crc32(text.encode("utf-8"))


@dataclass(frozen=True)
class PopulationDataset:
    id: str
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64).reshape(-1)
        if not self.id:
            raise DataError("population id must be non-empty")
        if X.ndim != 2:
            raise DataError(f"population {self.id!r}: X must be 2-D, got shape {X.shape}")
        if X.shape[0] < 1:
            raise DataError(f"population {self.id!r} has no rows")
        if X.shape[0] != y.shape[0]:
            raise DataError(
                f"population {self.id!r}: X has {X.shape[0]} rows but y has {y.shape[0]}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError(f"population {self.id!r} contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def take(self, rows) -> "PopulationDataset":
        rows = np.asarray(rows, dtype=np.intp)
        return PopulationDataset(self.id, self.X[rows], self.y[rows])


@dataclass(frozen=True)
class MultiPopulationData:
    feature_names: list[str]
    populations: list[PopulationDataset]
    target_name: str = "y"

    def __post_init__(self):
        m = len(self.feature_names)
        if m < 1:
            raise DataError("at least one feature is required")
        if not self.populations:
            raise DataError("at least one population is required")
        ids = [p.id for p in self.populations]
        if len(set(ids)) != len(ids):
            raise DataError(f"population ids must be unique, got {ids}")
        for p in self.populations:
            if p.X.shape[1] != m:
                raise DataError(
                    f"population {p.id!r} has {p.X.shape[1]} features, expected {m}"
                )

    @property
    def m(self) -> int:
        return len(self.feature_names)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.populations]

    def __getitem__(self, pop_id: str) -> PopulationDataset:
        for p in self.populations:
            if p.id == pop_id:
                return p
        raise KeyError(pop_id)

    def with_populations(self, populations) -> "MultiPopulationData":
        return MultiPopulationData(list(self.feature_names), list(populations), self.target_name)

    def select_columns(self, columns) -> "MultiPopulationData":
        columns = list(columns)
        return MultiPopulationData(
            [self.feature_names[c] for c in columns],
            [PopulationDataset(p.id, p.X[:, columns], p.y) for p in self.populations],
            self.target_name,
        )

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.vstack([p.X for p in self.populations]),
            np.concatenate([p.y for p in self.populations]),
        )


# --------------------------------------------------------------------------- CSV


def load_csv(path, population_column: str, target_column: str) -> MultiPopulationData:
    """Read a headed CSV into one population per distinct value of
    ``population_column``. Every other column except the target is a feature."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for col in (population_column, target_column):
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        pop_idx = header.index(population_column)
        y_idx = header.index(target_column)
        feat_idx = [i for i in range(len(header)) if i not in (pop_idx, y_idx)]
        if not feat_idx:
            raise SchemaError(f"{path}: no feature columns")

        rows: dict[str, tuple[list, list]] = {}
        for row_no, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {row_no} has {len(row)} fields, expected {len(header)}"
                )
            key = row[pop_idx].strip()
            if not key:
                raise DataError(f"{path}: row {row_no} has an empty population id")
            values = []
            for i in feat_idx + [y_idx]:
                try:
                    v = float(row[i])
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_no}, column {header[i]!r}: non-numeric value {row[i]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: row {row_no}, column {header[i]!r}: non-finite value {row[i]!r}"
                    )
                values.append(v)
            xs, ys = rows.setdefault(key, ([], []))
            xs.append(values[:-1])
            ys.append(values[-1])

    if not rows:
        raise DataError(f"{path}: no data rows")
    pops = [PopulationDataset(k, np.array(xs), np.array(ys)) for k, (xs, ys) in rows.items()]
    return MultiPopulationData([header[i] for i in feat_idx], pops, target_column)


def write_csv(data: MultiPopulationData, path, population_column: str = "population") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([population_column, *data.feature_names, data.target_name])
        for p in data.populations:
            for xrow, yv in zip(p.X, p.y):
                writer.writerow([p.id, *(repr(float(v)) for v in xrow), repr(float(yv))])


# ------------------------------------------------------------------ standardize


@dataclass(frozen=True)
class StandardizationParams:
    """Affine maps used to standardize a dataset.

    For ``scope="pooled"`` the arrays hold one entry (key ``"*"``); for
    ``scope="per_population"`` one entry per population id.
    """

    scope: str
    means: dict[str, np.ndarray]
    stds: dict[str, np.ndarray]
    target_mean: dict[str, float]
    target_std: dict[str, float]
    constant_columns: dict[str, list[int]] = field(default_factory=dict)

    @property
    def warning(self) -> bool:
        return any(self.constant_columns.values())

    def _key(self, pop_id: str) -> str:
        return "*" if self.scope == "pooled" else pop_id

    def apply(self, data: MultiPopulationData) -> MultiPopulationData:
        pops = []
        for p in data.populations:
            k = self._key(p.id)
            pops.append(
                PopulationDataset(
                    p.id,
                    (p.X - self.means[k]) / self.stds[k],
                    (p.y - self.target_mean[k]) / self.target_std[k],
                )
            )
        return data.with_populations(pops)

    def invert(self, data: MultiPopulationData) -> MultiPopulationData:
        pops = []
        for p in data.populations:
            k = self._key(p.id)
            pops.append(
                PopulationDataset(
                    p.id,
                    p.X * self.stds[k] + self.means[k],
                    p.y * self.target_std[k] + self.target_mean[k],
                )
            )
        return data.with_populations(pops)


def _moments(X: np.ndarray, y: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    const = [int(j) for j in np.flatnonzero(std <= 1e-12 * np.maximum(1.0, np.abs(mean)))]
    std = std.copy()
    std[const] = 1.0
    y_std = float(y.std())
    if y_std <= 1e-12 * max(1.0, abs(float(y.mean()))):
        y_std = 1.0
    return mean, std, float(y.mean()), y_std, const


def fit_standardization(data: MultiPopulationData, scope: str = "pooled") -> StandardizationParams:
    if scope not in ("pooled", "per_population"):
        raise ValueError(f"unknown standardization scope {scope!r}")
    groups = {"*": data.pooled()} if scope == "pooled" else {p.id: (p.X, p.y) for p in data.populations}
    means, stds, tm, ts, const = {}, {}, {}, {}, {}
    for k, (X, y) in groups.items():
        means[k], stds[k], tm[k], ts[k], const[k] = _moments(X, y)
    return StandardizationParams(scope, means, stds, tm, ts, const)


def standardize(data: MultiPopulationData, scope: str = "pooled"):
    """Z-score features and target (population std, ddof=0).

    Constant columns are centered and left with unit scale; ``params.warning``
    flags them.
    """
    params = fit_standardization(data, scope)
    return params.apply(data), params


# ------------------------------------------------------------------------ split


@dataclass(frozen=True)
class SplitBundle:
    feature_selection: MultiPopulationData
    downstream_train: MultiPopulationData
    downstream_test: MultiPopulationData


def split_sizes(n: int) -> tuple[int, int, int]:
    fs = (6 * n) // 10
    rest = n - fs
    train = (8 * rest) // 10
    return fs, train, rest - train


def split_indices(n: int, seed: int, pop_id: str):
    perm = np.random.default_rng([seed, stable_key(pop_id)]).permutation(n)
    fs, train, _ = split_sizes(n)
    return perm[:fs], perm[fs : fs + train], perm[fs + train :]


def split_dataset(data: MultiPopulationData, seed: int) -> SplitBundle:
    """Per population: shuffle, take 60% for feature selection and split the
    remaining 40% 80:20 into downstream train and test."""
    parts = ([], [], [])
    for p in data.populations:
        if p.n < 5:
            raise DataError(f"population {p.id!r} has {p.n} rows; at least 5 are needed to split")
        for bucket, rows in zip(parts, split_indices(p.n, seed, p.id)):
            bucket.append(p.take(rows))
    return SplitBundle(*(data.with_populations(b) for b in parts))


# -------------------------------------------------------------------- synthetic

# (population id, relative share) per benchmark
SYNTHETIC_PROPORTIONS = {
    1: [("A", 40), ("B", 35), ("C", 25)],
    2: [("A", 40), ("B", 35), ("C", 25), ("D", 15)],
    3: [("A", 35), ("B", 35), ("C", 30)],
}
SYNTHETIC_MIN_DIM = {1: 15, 2: 50, 3: 50}

# features that carry signal in at least one population
SYNTHETIC_SIGNAL = {
    1: tuple(range(11)),
    2: (0, 1, 2, 5, 6, 7),
    3: (0, 5, 10, 15, 20, 25, 30, 35, 40, 45),
}


def synthetic_mean(dataset_id: int, pop: str, X: np.ndarray) -> np.ndarray:
    """Noiseless outcome E[Y | X] for one population of a synthetic benchmark."""
    x = lambda i: X[:, i]  # noqa: E731
    if dataset_id == 1:
        if pop == "A":
            return 8 * x(0) + 6 * x(1) - 4 * x(2) + 3 * x(3) + 2 * x(4)
        if pop == "B":
            return -8 * x(0) - 6 * x(1) + 4 * x(2) - 3 * x(3) - 2 * x(4) + 8 * x(5) + 6 * x(6)
        if pop == "C":
            return 10 * x(7) + 8 * x(8) + 6 * x(9) - 5 * x(10)
    elif dataset_id == 2:
        if pop in ("A", "B"):
            return 4 * x(0) + 3 * x(1) + x(2) ** 2
        if pop == "C":
            return 2 * x(0) + 3 * x(5) * x(6) + 4 * np.sin(2 * x(7))
        if pop == "D":
            return 3 * x(0) + 2 * x(1)
    elif dataset_id == 3:
        if pop == "A":
            return 5 * x(0) + 4 * x(15) + 3 * x(30)
        if pop == "B":
            return 6 * x(5) + 5 * x(20) + 4 * x(35)
        if pop == "C":
            return 7 * x(10) + 6 * x(25) + 5 * x(40) + 4 * x(45)
    raise ValueError(f"unknown synthetic population {dataset_id}/{pop}")


def _noise(dataset_id: int, pop: str, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    if dataset_id == 2:
        if pop == "A":
            return rng.normal(0.0, 0.05, n)
        if pop == "B":
            sigma = np.exp(0.5 * X[:, 3] + 0.3 * X[:, 4])
            return sigma * rng.standard_normal(n) * 0.1
        if pop == "D":
            return rng.standard_t(3, n) * 0.2
    return rng.normal(0.0, 0.1, n)


def population_sizes(dataset_id: int, n_total: int) -> list[tuple[str, int]]:
    """Largest-remainder apportionment of ``n_total`` by the benchmark's shares."""
    shares = SYNTHETIC_PROPORTIONS[dataset_id]
    total = sum(s for _, s in shares)
    exact = [n_total * s / total for _, s in shares]
    sizes = [math.floor(e) for e in exact]
    order = sorted(range(len(shares)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n_total - sum(sizes)]:
        sizes[i] += 1
    return [(name, size) for (name, _), size in zip(shares, sizes)]


def _covariates(dataset_id: int, n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    if dataset_id != 3:
        return rng.standard_normal((n, dim))
    X = np.empty((n, dim))
    X[:, 0] = rng.standard_normal(n)
    eta = rng.standard_normal((n, dim - 1))
    for i in range(dim - 1):
        X[:, i + 1] = 0.3 * X[:, i] + 0.7 * eta[:, i]
    return X


def generate_synthetic(
    dataset_id: int, n_total: int, dim: int, seed: int, noiseless: bool = False
) -> MultiPopulationData:
    if dataset_id not in SYNTHETIC_PROPORTIONS:
        raise ValueError(f"dataset_id must be 1, 2 or 3, got {dataset_id}")
    if dim < SYNTHETIC_MIN_DIM[dataset_id]:
        raise DataError(
            f"synthetic dataset {dataset_id}: dim below required {SYNTHETIC_MIN_DIM[dataset_id]}"
        )
    if n_total < 100:
        raise DataError(f"n_total must be at least 100, got {n_total}")
    rng = np.random.default_rng([seed, dataset_id])
    pops = []
    for name, size in population_sizes(dataset_id, n_total):
        X = _covariates(dataset_id, size, dim, rng)
        y = synthetic_mean(dataset_id, name, X)
        eps = _noise(dataset_id, name, X, rng)
        if not noiseless:
            y = y + eps
        pops.append(PopulationDataset(name, X, y))
    return MultiPopulationData([f"x{i}" for i in range(dim)], pops, "y")
