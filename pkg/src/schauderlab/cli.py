"""Command-line entry point: `lab run`, `lab validate-config`, `lab list`.

Exit codes: 0 all verdicts passed, 2 a verdict failed, 1 execution error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import EXPERIMENTS, ExperimentConfig, default_config, emit, run_experiment, validate_config


def _parse_resolutions(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _load_config(experiment: str, args) -> ExperimentConfig:
    if args.config:
        data = json.loads(Path(args.config).read_text())
        data.setdefault("experiment", experiment)
        if data["experiment"] != experiment:
            raise ValueError(f"config is for {data['experiment']!r}, requested {experiment!r}")
        cfg = ExperimentConfig.from_dict(data)
    else:
        cfg = default_config(experiment)
    if args.resolutions:
        cfg.resolutions = _parse_resolutions(args.resolutions)
    if args.ensemble is not None:
        cfg.ensemble = args.ensemble
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.delta is not None:
        cfg.delta = args.delta
    if args.nu is not None:
        cfg.nu = args.nu
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="lab", description="Partial Holder estimate verification lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and emit its report")
    p_run.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p_run.add_argument("--config", help="JSON config file (ExperimentConfig fields)")
    p_run.add_argument("--resolutions", help="comma-separated points-per-axis list, e.g. 33,65,129")
    p_run.add_argument("--ensemble", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--delta", type=float)
    p_run.add_argument("--nu", type=float)
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--formats", default="json,csv,svg", help="comma-separated: json,csv,svg")

    p_val = sub.add_parser("validate-config", help="check a config file")
    p_val.add_argument("path")

    sub.add_parser("list", help="list experiment ids and the estimates they verify")

    args = parser.parse_args(argv)

    if args.command == "list":
        for key in sorted(EXPERIMENTS):
            print(f"{key}: {EXPERIMENTS[key][1]}")
        return 0

    if args.command == "validate-config":
        try:
            data = json.loads(Path(args.path).read_text())
            cfg = ExperimentConfig.from_dict(data)
        except (OSError, ValueError, TypeError) as exc:
            print(f"invalid: {exc}")
            return 1
        errs = validate_config(cfg)
        if errs:
            for e in errs:
                print(f"invalid: {e}")
            return 1
        print("ok")
        return 0

    # run
    try:
        cfg = _load_config(args.experiment, args)
        report = run_experiment(cfg)
        out_dir = Path(cfg.out_dir) / cfg.experiment
        written = emit(report, [f.strip() for f in args.formats.split(",") if f.strip()], out_dir)
    except Exception as exc:  # execution failure -> exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for key, ok in report.verdicts.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {cfg.experiment} {key}")
    for p in written:
        print(f"wrote {p}")
    return 0 if report.passed else 2


if __name__ == "__main__":
    sys.exit(main())
