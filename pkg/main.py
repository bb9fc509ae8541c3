"""
Main entry point for calib7.
"""
import sys
import argparse
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent))

from pydantic import ValidationError

from src.core.errors import Calib7Error
from src.core.runner import FAMILIES, RunConfig, VerificationRunner
from src.utils.logging import setup_logging


def _grid(text: str):
    try:
        return tuple(int(n) for n in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or N,M, got {text!r}")


def _t_range(text: str):
    try:
        lo, hi = text.split(':')
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Numerical verification of coassociative 4-folds in R^7')
    parser.add_argument('--log-level', default=None, help='Override CALIB7_LOG_LEVEL')
    sub = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (('verify', 'Run coassociativity and CR checks'),
                            ('invariants', 'Classify a CR-holomorphic curve'),
                            ('profile', 'Emit the profile curve of the Harvey-Lawson family')):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument('--family', choices=FAMILIES, help='Built-in family')
        cmd.add_argument('--input', help='Lift or A/B data as JSON')
        cmd.add_argument('--k', type=float, default=1.0, help='Family parameter k >= 0')
        cmd.add_argument('--grid', type=_grid, help='Grid nodes N[,M]')
        cmd.add_argument('--t-range', type=_t_range, dest='t_range', help='Profile parameter range A:B')
        cmd.add_argument('--seed', type=int, default=None)
        cmd.add_argument('--tol', type=float, default=None, help='Tolerance of the coassociativity checks')
        cmd.add_argument('--fd-step', type=float, dest='fd_step', default=None, help='Finite-difference step')
        cmd.add_argument('--out', default=None, help='Output path')
        cmd.add_argument('--format', choices=('json', 'csv', 'svg'), default='json')
    return parser


def main(argv=None) -> int:
    """Parse arguments, run the command and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    options = {k: v for k, v in vars(args).items() if v is not None and k != 'log_level'}
    try:
        config = RunConfig(**options)
    except ValidationError as e:
        print(f"Invalid arguments: {e}", file=sys.stderr)
        return 2

    try:
        return VerificationRunner(config).run()
    except Calib7Error as e:
        print(f"Error ({type(e).__name__}): {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("\nInterrupted.", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
