"""Command-line front end.

    xwishart run <config> [--mode M] [--seed N] [--out DIR]
    xwishart run --preset desk-fig1 [--out DIR]
    xwishart presets

Exit codes: 0 all thresholds pass, 1 threshold failure, 2 config or model
error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import PRESETS, preset_config, validate_config
from .errors import ConvergenceFailure, XWishartError
from .runner import EXIT_CONFIG, EXIT_SOLVER, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xwishart",
        description="Spectral density of cross-correlated Wishart matrix products",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a config file or preset")
    run_p.add_argument("config", nargs="?", help="TOML or JSON experiment config")
    run_p.add_argument("--preset", choices=sorted(PRESETS), help="use a bundled preset")
    run_p.add_argument("--mode", help="override mode: full, theory-only or mc-only")
    run_p.add_argument("--seed", type=int, help="override the RNG seed")
    run_p.add_argument("--out", help="override the output directory")

    sub.add_parser("presets", help="list the bundled presets")
    return parser


def _cmd_run(args) -> int:
    if (args.config is None) == (args.preset is None):
        print("error: give exactly one of a config file or --preset", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    try:
        raw = preset_config(args.preset) if args.preset else args.config
        config = validate_config(raw, overrides)
        result = run(config)
    except ConvergenceFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except XWishartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"artifacts written to {result.output_dir}")
    if result.report is not None:
        rep = result.report
        print(f"l1={rep.l1_distance:.4f} sup={rep.sup_distance:.4f} "
              f"normalization_defect={rep.normalization_defect:.2e} "
              f"passed={rep.passed}")
    return result.exit_code


def _cmd_presets() -> int:
    for name in sorted(PRESETS):
        entry = PRESETS[name]
        model = entry["model"]
        dims = entry["dims"]
        print(f"{name:10s} n={dims['n']:4d} total={dims['total']:5d} "
              f"t_factor={dims['t_factor']} samples={entry['n_samples']:5d} "
              f"model=a{model['a']}/b{model['b']}/c{model['c']}/{model['cross_kind']}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "presets":
        return _cmd_presets()
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
