"""Command-line entry point: ``drfs run|validate|gradcheck|generate-data``."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config, parse_seeds, read_config_file, validate_config
from .experiment import (EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, StageError,
                         exit_code_for, run_experiment, with_overrides)


def _seeds_arg(text):
    try:
        return parse_seeds(text)
    except TypeError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drfs", description="Distributionally robust feature selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True, metavar="PATH")
    run.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    run.add_argument("--seeds", type=_seeds_arg, metavar="LIST", help="comma-separated seeds")
    run.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes over seeds")
    run.add_argument("--backend", choices=("python", "cython"), default=None)

    val = sub.add_parser("validate", help="check a config file and list every problem")
    val.add_argument("--config", required=True, metavar="PATH")
    val.add_argument("--seeds", type=_seeds_arg, metavar="LIST")

    gc = sub.add_parser("gradcheck", help="finite-difference check of the objective gradient")
    gc.add_argument("--config", metavar="PATH", help="read objective settings from this config")
    gc.add_argument("--populations", type=int, default=3)
    gc.add_argument("--n", type=int, default=20, help="rows per population")
    gc.add_argument("--m", type=int, default=5, help="features")
    gc.add_argument("--points", type=int, default=10)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--tol", type=float, default=1e-4)
    gc.add_argument("--backend", choices=("python", "cython"), default=None)
    gc.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)

    gen = sub.add_parser("generate-data", help="write a synthetic dataset as CSV")
    gen.add_argument("--dataset", type=int, choices=(1, 2, 3), required=True)
    gen.add_argument("--n-total", type=int, required=True)
    gen.add_argument("--dim", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noiseless", action="store_true")
    gen.add_argument("--out", required=True, metavar="PATH")
    return parser


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for d in exc.diagnostics:
            _err(f"[config] {d}")
        return EXIT_CONFIG
    cfg = with_overrides(cfg, args.seeds, args.out)
    if args.parallel < 1:
        _err("[config] --parallel must be >= 1")
        return EXIT_CONFIG
    try:
        report = run_experiment(cfg, args.out, args.parallel, args.backend)
    except StageError as exc:
        _err(str(exc))
        return exc.code
    out = args.out or cfg.resolve(cfg.output_dir)
    for entry in report["results"]["seeds"]:
        if "selected" in entry and "drfs" in entry["selected"]:
            print(f"seed {entry['seed']}: selected {entry['selected']['drfs']}")
    print(f"wrote report to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    diags = validate_config(args.config, args.seeds)
    for d in diags:
        print(d)
    if not diags:
        print("ok")
    return EXIT_OK if not diags else EXIT_CONFIG


def cmd_gradcheck(args) -> int:
    from dataclasses import replace

    from .gradcheck import run_gradcheck
    from .objective import ObjectiveConfig

    obj_cfg = ObjectiveConfig(b=4, seed=args.seed)
    if args.config:
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            for d in exc.diagnostics:
                _err(f"[config] {d}")
            return EXIT_CONFIG
        obj_cfg = replace(cfg.objective, seed=args.seed)
    corrupt = (lambda g: g * 1.1 + 1e-3) if args.corrupt else None
    try:
        res = run_gradcheck(args.populations, args.n, args.m, args.points, args.seed, obj_cfg,
                            backend=args.backend, corrupt=corrupt, tol=args.tol)
    except ValueError as exc:
        _err(f"[gradcheck] {exc}")
        return EXIT_CONFIG
    status = "PASS" if res.passed else "FAIL"
    print(f"gradcheck {status}: max relative error {res.max_rel_error:.3e} (tol {res.tol:.0e})")
    return EXIT_OK if res.passed else EXIT_NUMERIC


def cmd_generate(args) -> int:
    from .data import DataError, generate_synthetic, write_csv

    try:
        data = generate_synthetic(args.dataset, args.n_total, args.dim, args.seed, args.noiseless)
        write_csv(data, args.out)
    except DataError as exc:
        _err(f"[data] {exc}")
        return EXIT_DATA
    except OSError as exc:
        _err(f"[write] {exc}")
        return exit_code_for(exc)
    print(f"wrote {sum(p.n for p in data.populations)} rows to {args.out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "gradcheck": cmd_gradcheck,
            "generate-data": cmd_generate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
