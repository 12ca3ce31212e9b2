#!/usr/bin/env python3
"""
Off-Grid Channel Estimation Experiments
Dataset generation, SBL baselines, DDPG training and evaluation sweeps
"""

import os
import sys
import logging
import argparse

from dotenv import load_dotenv

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from harness.commands import (  # noqa: E402
    apply_overrides,
    cli_blackbox,
    cli_evaluate,
    cli_generate,
    cli_run_sbl,
    cli_train,
    cli_zero_pad_eval,
)
from harness.config import load_config, write_default_config  # noqa: E402
from utils.errors import OffGridError  # noqa: E402
from utils.logging_setup import configure_logging  # noqa: E402

logger = logging.getLogger(__name__)

COMMANDS = ('defaults', 'generate', 'run-sbl', 'train', 'evaluate', 'blackbox', 'zero-pad-eval')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Off-grid SBL channel estimation with DDPG-driven unfolding")
    parser.add_argument("command", choices=COMMANDS, help="Experiment stage to run")
    parser.add_argument("--config", help="Experiment configuration (JSON); defaults are used when omitted")
    parser.add_argument("--seed", type=int, help="Override the seed of the stage being run")
    parser.add_argument("--output-dir", default=os.environ.get('OFFGRID_OUTPUT_DIR'),
                        help="Root directory for datasets, checkpoints and metrics")
    parser.add_argument("--checkpoint", help="Agent checkpoint for evaluate / zero-pad-eval")
    parser.add_argument("--path", default="config.json", help="Destination of the defaults file")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--verbose", action="store_true", help="Enable info logging")
    return parser


def run(args: argparse.Namespace) -> None:
    if args.command == 'defaults':
        write_default_config(args.path)
        return

    config = apply_overrides(load_config(args.config), args.command, args.seed, args.output_dir)
    logger.info(f"Running {args.command} for experiment '{config.name}'")

    if args.command == 'generate':
        cli_generate(config)
    elif args.command == 'run-sbl':
        cli_run_sbl(config)
    elif args.command == 'train':
        report = cli_train(config)
        logger.info(f"Best checkpoint: {report.checkpoint_path}")
    elif args.command == 'evaluate':
        cli_evaluate(config, args.checkpoint)
    elif args.command == 'blackbox':
        cli_blackbox(config)
    elif args.command == 'zero-pad-eval':
        if not args.checkpoint:
            raise OffGridError("zero-pad-eval needs --checkpoint")
        cli_zero_pad_eval(config, args.checkpoint)


def main():
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args()

    if args.debug:
        configure_logging(logging.DEBUG)
    elif args.verbose:
        configure_logging(logging.INFO)
    else:
        configure_logging(os.environ.get('OFFGRID_LOG_LEVEL'))

    try:
        run(args)
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        sys.exit(130)
    except (OffGridError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
