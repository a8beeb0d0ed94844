"""Experiment configuration: YAML in, validated dataclasses out.

Validation collects every violation instead of stopping at the first, and
the normalized config echoes back to a YAML document that loads to the same
configuration.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields

import yaml

from .data import SYNTHETIC_MIN_DIM
from .evaluation import DownstreamConfig
from .mu_model import KINDS
from .objective import REG_KINDS, ObjectiveConfig
from .optimizer import OptimizerConfig
from .selectors import METHODS, BaselineConfig, MuConfig


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class DataSource:
    kind: str = "synthetic"
    dataset: int = 1
    n_total: int = 3600
    dim: int = 15
    seed: int | None = None  # None: regenerate per run seed
    noiseless: bool = False
    path: str | None = None
    population_column: str = "population"
    target_column: str = "y"


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSource = DataSource()
    budget: int = 10
    seeds: tuple = (0, 1, 2)
    methods: tuple = METHODS
    mu_model: MuConfig = MuConfig()
    objective: ObjectiveConfig = ObjectiveConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    baselines: BaselineConfig = BaselineConfig()
    downstream: DownstreamConfig = DownstreamConfig()
    output_dir: str = "results"
    base_dir: str = field(default=".", compare=False)

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)


# ---------------------------------------------------------------- field rules

def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return v


def _float(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", ".inf"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("expected a number")
    return float(v)


def _str(v):
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _opt(conv):
    def inner(v):
        return None if v is None else conv(v)
    return inner


def _ge(lo):
    return (lambda v: v is None or v >= lo), f"must be >= {lo}"


def _gt(lo):
    return (lambda v: v > lo), f"must be > {lo}"


def _one_of(options):
    return (lambda v: v in options), f"must be one of {list(options)}"


_ANY = (lambda v: True), ""

# section -> yaml key -> (converter, check, dataclass attribute)
RULES = {
    "data": {
        "source": (_str, _one_of(("synthetic", "csv")), "kind"),
        "dataset": (_int, _one_of((1, 2, 3)), "dataset"),
        "n_total": (_int, _ge(100), "n_total"),
        "dim": (_int, _ge(1), "dim"),
        "seed": (_opt(_int), _ge(0), "seed"),
        "noiseless": (_bool, _ANY, "noiseless"),
        "path": (_opt(_str), _ANY, "path"),
        "population_column": (_str, _ANY, "population_column"),
        "target_column": (_str, _ANY, "target_column"),
    },
    "mu_model": {
        "kind": (_str, _one_of(KINDS), "kind"),
        "k_mu": (_int, _ge(1), "k_mu"),
        "penalty": (_float, _ge(0), "penalty"),
    },
    "objective": {
        "b": (_int, _ge(1), "b"),
        "K": (_opt(_int), _ge(1), "K"),
        "beta": (_float, _gt(0), "beta"),
        "lambda": (_float, _ge(0), "lam"),
        "reg_kind": (_str, _one_of(REG_KINDS), "reg_kind"),
    },
    "optimizer": {
        "epochs": (_int, _ge(1), "epochs"),
        "learning_rate": (_float, _gt(0), "learning_rate"),
        "lr_schedule": (_str, _one_of(("cosine", "constant")), "lr_schedule"),
        "lr_min": (_float, _ge(0), "lr_min"),
        "adam_beta1": (_float, ((lambda v: 0 <= v < 1), "must lie in [0, 1)"), "adam_beta1"),
        "adam_beta2": (_float, ((lambda v: 0 <= v < 1), "must lie in [0, 1)"), "adam_beta2"),
        "adam_eps": (_float, _gt(0), "adam_eps"),
        "init_center": (_float, _gt(0), "init_center"),
        "init_noise_std": (_float, _ge(0), "init_noise_std"),
        "snapshot_every": (_int, _ge(1), "snapshot_every"),
    },
    "baselines": {
        "lambda_L": (_float, _ge(0), "lambda_L"),
        "eta": (_float, _ge(0), "eta"),
        "T_max": (_int, _ge(1), "T_max"),
        "random_draws": (_int, _ge(1), "random_draws"),
    },
    "downstream": {
        "model_kind": (_str, _one_of(KINDS), "model_kind"),
        "k": (_int, _ge(1), "k"),
        "penalty": (_float, _ge(0), "penalty"),
    },
}

SECTION_TYPES = {
    "data": DataSource,
    "mu_model": MuConfig,
    "objective": ObjectiveConfig,
    "optimizer": OptimizerConfig,
    "baselines": BaselineConfig,
    "downstream": DownstreamConfig,
}
TOP_LEVEL = {"budget", "seeds", "methods", "output_dir", *RULES}


def _section(name, raw, diags) -> dict:
    """Converted keyword arguments for one section's dataclass."""
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        diags.append(f"{name}: expected a mapping")
        return {}
    out = {}
    for key, value in raw.items():
        rule = RULES[name].get(key)
        if rule is None:
            diags.append(f"{name}.{key}: unknown key")
            continue
        conv, (check, msg), attr = rule
        try:
            v = conv(value)
        except TypeError as exc:
            diags.append(f"{name}.{key}: {exc} (got {value!r})")
            continue
        if v is not None and not check(v):
            diags.append(f"{name}.{key}: {msg} (got {value!r})")
            continue
        out[attr] = v
    return out


def parse_seeds(value) -> tuple:
    if isinstance(value, str):
        value = [s for s in value.replace(" ", "").split(",") if s]
        try:
            value = [int(s) for s in value]
        except ValueError:
            raise TypeError("seeds must be integers") from None
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in value
    ):
        raise TypeError("seeds must be a list of nonnegative integers")
    return tuple(value)


def csv_feature_count(path, population_column, target_column) -> int:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    missing = [c for c in (population_column, target_column) if c not in header]
    if missing:
        raise ValueError(f"missing columns {missing}")
    return len(header) - 2


def config_from_dict(doc, base_dir: str = ".", seeds_override=None):
    """Build an ExperimentConfig. Returns ``(config or None, diagnostics)``."""
    diags = []
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        return None, ["config: top level must be a mapping"]
    for key in doc:
        if key not in TOP_LEVEL:
            diags.append(f"{key}: unknown key")
    kwargs = {name: _section(name, doc.get(name), diags) for name in RULES}

    top = {}
    try:
        top["budget"] = _int(doc.get("budget", ExperimentConfig.budget))
        if top["budget"] < 1:
            diags.append(f"budget: must be >= 1 (got {top['budget']})")
    except TypeError as exc:
        diags.append(f"budget: {exc}")
    try:
        top["seeds"] = parse_seeds(seeds_override if seeds_override is not None
                                   else doc.get("seeds", list(ExperimentConfig.seeds)))
        if not top["seeds"]:
            diags.append("seeds: must be non-empty")
    except TypeError as exc:
        diags.append(f"seeds: {exc}")
    methods = doc.get("methods", list(METHODS))
    if not isinstance(methods, list) or not methods:
        diags.append("methods: expected a non-empty list")
    else:
        bad = [mt for mt in methods if mt not in METHODS]
        if bad:
            diags.append(f"methods: unknown {bad}; choose from {list(METHODS)}")
        top["methods"] = tuple(methods)
    out_dir = doc.get("output_dir", ExperimentConfig.output_dir)
    if not isinstance(out_dir, str):
        diags.append("output_dir: expected a string")
    else:
        top["output_dir"] = out_dir

    data = DataSource(**kwargs["data"])
    m = None
    if data.kind == "synthetic":
        need = SYNTHETIC_MIN_DIM.get(data.dataset)
        if need is not None and data.dim < need:
            diags.append(f"data.dim: dim below required {need}")
        m = data.dim
    elif data.path is None:
        diags.append("data.path: required for csv sources")
    else:
        path = data.path if os.path.isabs(data.path) else os.path.join(base_dir, data.path)
        if not os.path.isfile(path):
            diags.append(f"data.path: file not found: {data.path}")
        else:
            try:
                m = csv_feature_count(path, data.population_column, data.target_column)
            except (OSError, ValueError) as exc:
                diags.append(f"data.path: {exc}")
    if m is not None and isinstance(top.get("budget"), int) and top["budget"] > m:
        diags.append(f"budget: k={top['budget']} exceeds the {m} available features")

    if diags:
        return None, diags
    built = {}
    for name, cls in SECTION_TYPES.items():
        try:
            built[name] = cls(**kwargs[name])
        except ValueError as exc:
            diags.append(f"{name}: {exc}")
    if diags:
        return None, diags
    return ExperimentConfig(**built, **top, base_dir=base_dir), []


def _yaml_error_text(path, exc: yaml.YAMLError) -> str:
    mark = getattr(exc, "problem_mark", None)
    where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark is not None else str(path)
    problem = getattr(exc, "problem", None) or str(exc)
    return f"{where}: syntax error: {problem}"


def read_config_file(path):
    """Parsed YAML document. Raises ConfigError with line:column on bad syntax."""
    try:
        with open(path) as fh:
            return yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([_yaml_error_text(path, exc)]) from None


def validate_config(path, seeds_override=None) -> list[str]:
    """All diagnostics for the config at ``path`` (empty when valid)."""
    try:
        doc = read_config_file(path)
    except ConfigError as exc:
        return exc.diagnostics
    return config_from_dict(doc, os.path.dirname(os.path.abspath(path)), seeds_override)[1]


def load_config(path, seeds_override=None) -> ExperimentConfig:
    doc = read_config_file(path)
    cfg, diags = config_from_dict(doc, os.path.dirname(os.path.abspath(path)), seeds_override)
    if diags:
        raise ConfigError(diags)
    return cfg


def _plain(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Normalized echo; ``config_from_dict`` on it rebuilds ``cfg``."""
    doc = {}
    for name, rules in RULES.items():
        section = getattr(cfg, name)
        doc[name] = {key: _plain(getattr(section, attr)) for key, (_, _, attr) in rules.items()}
    doc.update(budget=cfg.budget, seeds=list(cfg.seeds), methods=list(cfg.methods),
               output_dir=cfg.output_dir)
    return doc


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def default_config_dict() -> dict:
    return config_to_dict(ExperimentConfig())


def _check_rules_cover_dataclasses():
    # every configurable attribute must have a rule (seed fields come from seeds)
    for name, cls in SECTION_TYPES.items():
        attrs = {r[2] for r in RULES[name].values()}
        extra = {f.name for f in fields(cls)} - attrs - {"seed", "train_scope"}
        assert not extra, (name, extra)


_check_rules_cover_dataclasses()
