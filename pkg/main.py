#!/usr/bin/env python3
"""Main entry point for the minimal exposure path solver."""

import argparse
import os
import sys
from dotenv import load_dotenv

from cli import CommandHandler, Settings, dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='mep',
        description='Minimal exposure paths through sensor fields (semi-Lagrangian policy iteration)'
    )
    parser.add_argument('--verbose', action='store_true', default=None,
                        help='Print per-iteration solver status (default: $MEP_VERBOSE)')
    subparsers = parser.add_subparsers(dest='command', required=True)
    CommandHandler.register_all(subparsers)
    return parser


def main(argv=None) -> int:
    """Main function."""
    # Load environment variables
    load_dotenv()

    settings = Settings(
        jobs=int(os.getenv('MEP_JOBS', '1')),
        output_dir=os.getenv('MEP_OUTPUT_DIR', './data/runs'),
        db_path=os.getenv('MEP_DB_PATH', './data/benchmarks.db'),
        workers=int(os.getenv('MEP_WORKERS', '1')),
        verbose=os.getenv('MEP_VERBOSE', 'false').lower() == 'true',
    )

    args = build_parser().parse_args(argv)
    if args.verbose is not None:
        settings.verbose = args.verbose

    print("="*60)
    print("Minimal Exposure Path solver")
    print("="*60)
    print(f"Command: {args.command}")
    print(f"Workers: {settings.workers}  Jobs: {settings.jobs}")
    print(f"Output: {settings.output_dir}")
    print(f"Database: {settings.db_path}")
    print("="*60)

    return dispatch(args, settings)


if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nInterrupted.")
        sys.exit(130)
