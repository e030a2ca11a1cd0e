import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import EXPERIMENTS, parse_config, serialize_config, validate_config
from .experiments import run_experiment
from .io import compare_densities
from .utils import ConfigError, QuasiLangevinError

EXPERIMENT_HELP = {
    "brownian-triple": "Langevin vs Fokker-Planck vs path-integral densities",
    "quantum-reference": "split-step and density-matrix path-integral references",
    "classical-limit": "Wigner-sampled Newton ensemble against the quantum oracle",
    "quasi-langevin": "signed-weight quasi-Langevin ensemble with sign diagnostics",
    "airy-figure": "plot of the Airy function over [-12, 4]",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quasi-langevin",
        description="Quantum and Brownian path integrals side by side, and the Airy-weighted quasi-Langevin process",
        epilog="Example: quasi-langevin brownian-triple --config configs/brownian_triple.json --seed 7",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--verbose", "-v", action="count", default=0, help="Log progress (-v info, -vv debug)"
    )
    sub = parser.add_subparsers(dest="command", metavar="experiment")
    sub.required = True

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=EXPERIMENT_HELP[name])
        p.add_argument("--config", "-c", help="JSON config file (default: built-in defaults)")
        p.add_argument("--seed", type=int, help="Override the master seed")
        p.add_argument("--out", "-o", help="Output directory (default: output.directory of the config)")
        p.add_argument(
            "--list-defaults", action="store_true", help="Print the full effective config and exit"
        )

    compare = sub.add_parser("compare", help="L1, Linf and KS distances between two density files")
    compare.add_argument("file_a", help="First density CSV")
    compare.add_argument("file_b", help="Second density CSV")
    compare.add_argument("--column-a", help="Density column of file_a when it holds several (e.g. split_step)")
    compare.add_argument("--column-b", help="Density column of file_b when it holds several")
    compare.add_argument("--dump", help="Write the per-bin differences to this CSV")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _run_compare(args: argparse.Namespace) -> None:
    result = compare_densities(args.file_a, args.file_b, args.dump, args.column_a, args.column_b)
    print(f"L1:   {result.l1:.10g}")
    print(f"Linf: {result.linf:.10g}")
    print(f"KS:   {result.ks:.10g}")


def _run_experiment(args: argparse.Namespace) -> None:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    cfg = parse_config(text, args.command)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
        errors = validate_config(cfg)
        if errors:
            raise ConfigError(errors)
    if args.list_defaults:
        print(serialize_config(cfg), end="")
        return
    result = run_experiment(cfg, Path(args.out) if args.out else None)
    print(result.report, end="")
    print(f"Wrote {len(result.files)} files to {result.directory}")


def main(argv: Optional[List[str]] = None) -> None:
    """Command-line interface for the quasi-Langevin lab."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    try:
        if args.command == "compare":
            _run_compare(args)
        else:
            _run_experiment(args)

    except ConfigError as e:
        for path, message in e.errors:
            print(f"Error: {path}: {message}" if path else f"Error: {message}", file=sys.stderr)
        sys.exit(e.exit_code)
    except QuasiLangevinError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(2)
    except Exception as e:
        print(f"Unexpected error: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
