#!/usr/bin/env python
# main.py
import argparse
import json
import logging
import os
import sys

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from core.errors import ConfigError, RelayNetError
from core.experiment.config import FORMATS, SCENARIOS, ScenarioConfig
from core.experiment.scenarios import run_scenario

# Set up logging
logging.basicConfig(
    level=os.environ.get("RELAYNET_LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger("RelayNet")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Rate regions and schedules of bi-directional multi-relay channels")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for scenario in SCENARIOS:
        p = sub.add_parser(scenario, help=f"Run the {scenario} scenario")
        p.add_argument("--config", help="Scenario YAML file (defaults apply when omitted)")
        p.add_argument("--out", help="Output root directory")
        p.add_argument("--format", choices=FORMATS, help="Table format (json also writes CSV)")
        p.add_argument("--hull", action="store_true", default=None, help="Report convex-hull frontiers")
        p.add_argument("--power-grid", action="store_true", default=None, help="Sweep broadcast power splits")
        p.add_argument("--lambda-steps", type=int, help="Number of boundary weights")
        p.add_argument("--verbose", action="store_true", help="Enable verbose logging")
    return parser


def load_config(args) -> ScenarioConfig:
    if args.config:
        cfg = ScenarioConfig.load(args.config)
        if cfg.scenario != args.scenario:
            raise ConfigError(f"{args.config} configures scenario '{cfg.scenario}', not '{args.scenario}'")
    else:
        cfg = ScenarioConfig.for_scenario(args.scenario)
    cfg.apply_overrides(args.out, args.format, args.hull, args.power_grid, args.lambda_steps)
    return cfg


def main(argv=None) -> int:
    """
    Main entry point for relaynet.

    Parses command line arguments, runs one scenario and prints where
    its tables were written.
    """
    args = build_parser().parse_args(argv)

    # Set log level based on verbosity
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        cfg = load_config(args)
        summary, session = run_scenario(cfg)
    except (RelayNetError, FileNotFoundError) as e:
        logger.debug(f"Scenario failed: {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"Error running scenario: {str(e)}")
        raise

    print(f"\nScenario complete: {cfg.scenario}")
    print(f"Session directory: {session.session_dir}")
    print(f"- Files written: {len(session.written)}")
    print(summary.to_string(index=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
