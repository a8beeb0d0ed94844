"""End-to-end runner: data → split → μ̂ → α → selections → downstream
metrics, written as a report bundle."""
from __future__ import annotations

import csv
import json
import os
import platform
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from ._backend import get_backend
from .config import ConfigError, ExperimentConfig, config_to_dict
from .data import DataError, MultiPopulationData, generate_synthetic, load_csv
from .evaluation import WORST, ComparisonTable, evaluate_seed, summarize
from .selectors import make_selectors

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class StageError(RuntimeError):
    """An error tagged with the pipeline stage and the process exit code."""

    def __init__(self, stage: str, message: str, code: int):
        super().__init__(stage, message, code)
        self.stage = stage
        self.message = message
        self.code = code

    def __str__(self):
        return f"[{self.stage}] {self.message}"


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, (FloatingPointError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    return EXIT_INTERNAL


class _stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if exc is None or isinstance(exc, StageError):
            return False
        raise StageError(self.name, str(exc), exit_code_for(exc)) from exc


def load_data(cfg: ExperimentConfig, seed: int) -> MultiPopulationData:
    src = cfg.data
    if src.kind == "synthetic":
        data_seed = seed if src.seed is None else src.seed
        return generate_synthetic(src.dataset, src.n_total, src.dim, data_seed, src.noiseless)
    return load_csv(cfg.resolve(src.path), src.population_column, src.target_column)


@dataclass
class SeedResult:
    seed: int
    feature_names: list
    ids: list
    alpha: list | None
    ranking: list | None
    trace_rows: list
    selections: dict
    cells: dict


def _jsonable_selection(sel):
    if sel and isinstance(sel[0], (list, tuple)):
        return [[int(i) for i in s] for s in sel]
    return [int(i) for i in sel]


def run_seed(cfg: ExperimentConfig, seed: int, backend: str | None = None) -> SeedResult:
    """Everything for one seed. All randomness derives from ``seed``."""
    with _stage("data"):
        data = load_data(cfg, seed)
        if cfg.budget > data.m:
            raise ConfigError([f"budget: k={cfg.budget} exceeds the {data.m} available features"])
    cache = {}
    selectors = make_selectors(cfg.objective, cfg.optimizer, cfg.mu_model, cfg.baselines,
                               backend, cache)
    with _stage("select+evaluate"):
        cells, selections = evaluate_seed(data, cfg.budget, list(cfg.methods), seed, selectors,
                                          cfg.downstream)
    drfs = cache.get(seed)
    rows = []
    if drfs is not None:
        rows = [{"seed": seed, **r} for r in drfs.trace.rows()]
    return SeedResult(
        seed, list(data.feature_names), list(data.ids),
        None if drfs is None else [float(a) for a in drfs.alpha],
        None if drfs is None else list(drfs.ranking),
        rows,
        {m: _jsonable_selection(s) for m, s in selections.items()},
        cells,
    )


def _trace_summary(rows: list, ids: list) -> dict:
    if not rows:
        return {}
    totals = [r["total"] for r in rows]
    return {
        "epochs": len(rows),
        "initial_total": totals[0],
        "final_total": totals[-1],
        "min_total": min(totals),
        "final_losses": {pid: rows[-1][f"loss_{pid}"] for pid in ids},
        "aggregate": [r["aggregate"] for r in rows],
    }


def run_all_seeds(cfg: ExperimentConfig, parallel: int = 1, backend: str | None = None) -> list:
    seeds = list(cfg.seeds)
    if parallel > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(run_seed, cfg, s, backend) for s in seeds]
            return [f.result() for f in futures]  # merge in seed order
    return [run_seed(cfg, s, backend) for s in seeds]


def build_report(cfg: ExperimentConfig, results: list, timings: dict, backend: str | None):
    """Returns ``(report dict, ComparisonTable)``."""
    methods = list(cfg.methods)
    seeds = [r.seed for r in results]
    cells = {(m, r.seed): r.cells[m] for r in results for m in methods}
    ids = results[0].ids
    table = ComparisonTable(summarize(methods, seeds, cells, ids), {}, cells)
    per_seed = []
    for r in results:
        entry = {"seed": r.seed, "selected": r.selections}
        if r.alpha is not None:
            entry.update(alpha=r.alpha, ranking=r.ranking, trace=_trace_summary(r.trace_rows, ids))
        entry["metrics"] = {
            m: {pid: {"mse": v.mse, "r2": v.r2, "n_test": v.n_test} for pid, v in r.cells[m].items()}
            for m in methods
        }
        per_seed.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(cfg),
        "results": {
            "feature_names": results[0].feature_names,
            "populations": ids,
            "worst_population_key": WORST,
            "seeds": per_seed,
            "comparison": table.to_records(),
        },
        "meta": {
            "version": __version__,
            "backend": get_backend(backend).NAME,
            "platform": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "machine": platform.machine(),
                "system": platform.system(),
            },
            "timings_s": timings,
        },
    }, table


def numeric_payload(report: dict) -> str:
    """Canonical JSON of everything except the ``meta`` block."""
    return json.dumps({k: v for k, v in report.items() if k != "meta"}, sort_keys=True)


def _write_bundle(tmp: str, report: dict, table: ComparisonTable, results: list) -> None:
    with open(os.path.join(tmp, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    table.to_csv(os.path.join(tmp, "comparison.csv"))
    rows = [row for r in results for row in r.trace_rows]
    with open(os.path.join(tmp, "trace.csv"), "w", newline="") as fh:
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    alpha_doc = {
        "feature_names": results[0].feature_names,
        "alpha": {str(r.seed): r.alpha for r in results if r.alpha is not None},
    }
    with open(os.path.join(tmp, "alpha.json"), "w") as fh:
        json.dump(alpha_doc, fh, indent=2)


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None, parallel: int = 1,
                   backend: str | None = None) -> dict:
    """Run every seed and write report.json, trace.csv, comparison.csv and
    alpha.json into ``out_dir``. Files appear only if the whole run succeeds."""
    out_dir = out_dir or cfg.resolve(cfg.output_dir)
    t0 = time.perf_counter()
    results = run_all_seeds(cfg, parallel, backend)
    timings = {"total": time.perf_counter() - t0}
    report, table = build_report(cfg, results, timings, backend)
    parent = os.path.dirname(os.path.abspath(out_dir)) or "."
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".drfs-", dir=parent)
    try:
        with _stage("write"):
            _write_bundle(tmp, report, table, results)
            os.makedirs(out_dir, exist_ok=True)
            for name in os.listdir(tmp):
                os.replace(os.path.join(tmp, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return report


def with_overrides(cfg: ExperimentConfig, seeds=None, output_dir=None) -> ExperimentConfig:
    changes = {}
    if seeds is not None:
        changes["seeds"] = tuple(seeds)
    if output_dir is not None:
        changes["output_dir"] = output_dir
    return replace(cfg, **changes) if changes else cfg
