"""Command line entry point for running localization experiments."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .harness import (
    ConfigError,
    aggregate,
    config_from_json,
    config_to_dict,
    default_config,
    emit_outputs,
    run_experiment,
)


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip() != "")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {exc}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="localize",
        description="Sonar-based global localization experiments for inspection AUVs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configured experiment over its seeds")
    run.add_argument("--config", required=True, help="experiment config JSON file")
    run.add_argument("--out", required=True, help="output directory for report/traces")
    run.add_argument("--seeds", type=_parse_seeds, default=None, help="override seed list, e.g. 1,2,3")
    run.add_argument("--snapshots", action="store_true", help="dump per-meter particle sets")
    run.add_argument("--workers", type=int, default=1, help="parallel seed workers")

    show = sub.add_parser("print-config", help="print a default config as JSON")
    show.add_argument("--mode", default="localization", choices=("localization", "tracking"))
    show.add_argument("--mission", type=int, default=3, choices=(1, 2, 3))
    show.add_argument("--frontends", default="sad+prec", choices=("sad", "sad+prec"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "print-config":
            cfg = default_config(args.mode, args.mission, args.frontends)
            print(json.dumps(config_to_dict(cfg), indent=2))
            return 0

        cfg = config_from_json(args.config)
        if args.seeds is not None:
            cfg = replace(cfg, seeds=args.seeds)
        if args.snapshots:
            cfg = replace(cfg, snapshots=True)
        cfg.validate()

        runs = run_experiment(cfg, workers=args.workers)
        report = aggregate(runs)
        written = emit_outputs(report, runs, cfg, args.out)
        print(
            f"{cfg.mode} mission {cfg.mission_id} [{cfg.frontends}]: "
            f"{report.successes}/{report.runs} runs converged "
            f"({report.success_rate_pct:.1f}%), "
            f"accuracy {report.acc_success_mean_m:.3f} +/- {report.acc_success_std_m:.3f} m"
        )
        print(f"wrote {len(written)} files to {args.out}")
        return 0
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
