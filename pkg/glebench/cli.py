"""
Command line front end.

Every subcommand reads a run configuration, runs the experiment and writes its artifacts::

    glebench kernel --config kernel.yaml --out results/kernel
    glebench coupling --config coupling.yaml --seed 7 --kappa auto --n-runs 200 --threads -1
    glebench replay --manifest results/kernel/manifest.json --out results/replayed

On failure ``error.json`` is written to the output directory and the exit status is 2 for configuration errors
and 1 otherwise.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from glebench import log
from glebench.api import COMMANDS, replay, run_experiment
from glebench.config import DEFAULT_OUTPUT_PATH
from glebench.logging import enable_logging
from glebench.processors import write_artifact
from glebench.runconfig import ConfigError, load_config, with_overrides
from glebench.utils import report_summary


def _kappa(value: str):
    """ Parse numbers; anything else is passed on and checked with the configuration. """
    try:
        return float(value)
    except ValueError:
        return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glebench",
                                     description="Simulate the Markovian GLE with power-law memory and verify its "
                                                 "invariant measure, scaling and coupling properties")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparser = subparsers.add_parser(command, help=f"run the {command} experiment")
        subparser.add_argument("--config", required=True, type=Path, help="the YAML run configuration")
        subparser.add_argument("--seed", type=int, help="override the master seed")
        subparser.add_argument("--out", type=Path, help="override the output directory")
        subparser.add_argument("--threads", type=int, default=1, help="worker processes, -1 for all but one CPU")
        subparser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
        if command == "coupling":
            subparser.add_argument("--lambda", dest="lambda_ctrl", type=float, help="the control rate")
            subparser.add_argument("--kappa", type=_kappa, help="the cost budget or 'auto'")
            subparser.add_argument("--n-runs", dest="n_runs", type=int, help="the number of coupled runs")
    subparser = subparsers.add_parser("replay", help="re-run a subcommand from its manifest")
    subparser.add_argument("--manifest", required=True, type=Path, help="the manifest.json of a previous run")
    subparser.add_argument("--out", type=Path, help="override the output directory")
    subparser.add_argument("--threads", type=int, default=1, help="worker processes, -1 for all but one CPU")
    subparser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    return parser


def write_error(error: Exception, output_dir: Path) -> Path:
    """ Write the machine-readable diagnostic of a failed run to ``output_dir/error.json``. """
    if isinstance(error, ConfigError):
        content = error.to_dict()
    else:
        content = {"error": type(error).__name__, "message": str(error), "kind": None, "location": None}
    return write_artifact(content, "JSON", Path(output_dir) / "error.json")


def _run(args: argparse.Namespace) -> Path:
    if args.command == "replay":
        with open(args.manifest, "r", encoding="utf-8") as manifest_file:
            manifest = json.load(manifest_file)
        if args.out is None:
            args.out = Path(manifest["config"]["output_dir"])
        replay(manifest, args.out, args.threads)
        return args.out
    config = load_config(args.config)
    overrides = None
    if args.command == "coupling":
        overrides = {"lambda": args.lambda_ctrl, "kappa": args.kappa, "n_runs": args.n_runs}
    if args.seed is not None or args.out is not None or overrides:
        config = with_overrides(config, args.seed, args.out, overrides)
    output_dir = args.out = Path(config.output_dir)
    report = run_experiment(args.command, config, args.threads)
    report.write(output_dir)
    report_summary(report)
    return output_dir


def _error_dir(args: argparse.Namespace) -> Path:
    if getattr(args, "out", None) is not None:
        return args.out
    return DEFAULT_OUTPUT_PATH


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    enable_logging(log_level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        output_dir = _run(args)
    except Exception as error:
        log.error(f"{type(error).__name__}: {error}")
        write_error(error, _error_dir(args))
        return 2 if isinstance(error, ConfigError) else 1
    log.info(f"Artifacts written to {output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
