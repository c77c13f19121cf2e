"""Command-line entry point: ``qaoa-thermal <command> [--config FILE] [overrides]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .ising import SizeLimitError
from .runner import FIGURE_KINDS, ConfigError, ExperimentConfig, emit_figure_data, run_experiment, write_instances

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_SIZE = 0, 1, 2, 3

COMMAND_ANALYSES = {
    "simulate": ["simulate"],
    "optimize": ["simulate"],
    "structure": ["structure", "mixture"],
    "normality": ["normality"],
    "thermal": ["thermal"],
    "scan": ["scan"],
    "mcmc": ["thermal", "mcmc"],
}

log = logging.getLogger("qaoa_thermal")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qaoa-thermal",
                                     description="Pseudo-Boltzmann analysis of single-layer QAOA states.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--n", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--family", choices=["qubo", "maxcut", "two_level"])
    common.add_argument("--density", type=float)
    common.add_argument("--instances", type=int, dest="instance_count")
    common.add_argument("--out", dest="output_dir")
    common.add_argument("--profile", choices=["quick", "full"])
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write instance JSON files")
    for name in COMMAND_ANALYSES:
        sub.add_parser(name, parents=[common], help=f"run the {name} analysis")
    sub.add_parser("run", parents=[common], help="run the analyses listed in the config")
    fig = sub.add_parser("figure", parents=[common], help="emit plot-ready figure data")
    fig.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be a JSON object")
    for key in ("n", "seed", "family", "density", "instance_count", "output_dir", "profile"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.command in COMMAND_ANALYSES:
        data["analyses"] = COMMAND_ANALYSES[args.command]
    if args.command == "optimize":
        data["angle_policy"] = {"kind": "optimize", **{k: v for k, v in data.get("angle_policy", {}).items()
                                                       if k != "kind" and k != "angles"}}
    return ExperimentConfig.from_dict(data)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = load_config(args)
        if args.command == "generate":
            paths = write_instances(config)
        elif args.command == "figure":
            paths = emit_figure_data(args.kind, config)
        else:
            paths = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizeLimitError as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for p in paths:
        log.info("wrote %s", p)
    print(json.dumps({"command": args.command, "files": [str(p) for p in paths],
                      "config": dataclasses.asdict(config)}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
