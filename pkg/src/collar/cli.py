"""collar <experiment> --config FILE [--seed N] [--out DIR]

Exit status: 0 pass, 1 failed verdict, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import EXPERIMENTS, ExperimentConfig, InvalidConfig, UnknownExperiment, config_from_dict, load_raw
from .experiments import OUTPUT_ENV, run_experiment
from .report import EmptyTrace

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser():
    ap = argparse.ArgumentParser(
        prog="collar",
        description="Numerical experiments on blown-up pseudo-Anosov collars.",
        epilog=f"Experiments: {', '.join(EXPERIMENTS)}. ${OUTPUT_ENV} overrides the output directory.",
    )
    ap.add_argument("experiment")
    ap.add_argument("--config", help="YAML or JSON experiment file")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="output root (report goes to OUT/<experiment>/)")
    ap.add_argument("--workers", type=int, help="threads for parallel sections; does not change results")
    ap.add_argument("-q", "--quiet", action="store_true")
    return ap


def resolve_config(args) -> ExperimentConfig:
    if args.experiment not in EXPERIMENTS:
        raise UnknownExperiment(args.experiment)
    raw = load_raw(args.config) if args.config else {}
    if isinstance(raw, dict):
        named = raw.get("experiment", args.experiment)
        if named not in EXPERIMENTS:
            raise UnknownExperiment(named)
        # a config written for another experiment is almost certainly a mistake
        if named != args.experiment:
            raise InvalidConfig("experiment", f"config is for {named!r}, not {args.experiment!r}")
        raw = {**raw, "experiment": args.experiment}
    cfg = config_from_dict(raw)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    try:
        return dataclasses.replace(cfg, **changes)
    except InvalidConfig:
        raise
    except ValueError as e:
        raise InvalidConfig("", str(e)) from None


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASS
    try:
        cfg = resolve_config(args)
    except InvalidConfig as e:
        print(f"collar: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        res = run_experiment(cfg, out=args.out)
    except (EmptyTrace, OSError) as e:
        print(f"collar: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not args.quiet:
        print(f"{cfg.experiment}: {res.report['verdict']} ({res.wall_clock:.2f} s) -> {res.directory}")
    return EXIT_PASS if res.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
