"""Command line entry point: ``fkup <experiment> --config cfg.json [--check]``."""

import argparse
import json
import sys
from dataclasses import replace

from .harness import EXPERIMENTS, ConfigError, ExperimentConfig, ExperimentError
from .harness import run_experiment, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_EXPERIMENT, EXIT_CHECK = 0, 1, 2, 3


def _fail(kind, message, code):
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="fkup", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="ExperimentConfig JSON file")
    parser.add_argument("--check", action="store_true",
                        help="exit 3 if any acceptance threshold fails")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweep rows")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigError(
                f"config is for {cfg.experiment!r}, not {args.experiment!r}"
            )
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)

    try:
        result = run_experiment(cfg, jobs=args.jobs)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except ExperimentError as exc:
        if exc.result is not None:
            write_outputs(exc.result, cfg.output_dir)
        return _fail("experiment", str(exc), EXIT_EXPERIMENT)
    except (ArithmeticError, ValueError) as exc:
        return _fail("experiment", f"{type(exc).__name__}: {exc}", EXIT_EXPERIMENT)

    write_outputs(result, cfg.output_dir)
    if args.check and not result.passed:
        failed = [c["name"] for c in result.checks if not c["passed"]]
        return _fail("check", "failed: " + ", ".join(failed), EXIT_CHECK)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
