"""Command line interface.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 comparison tolerance exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .app import NumericalError, build_problem, compare_schemes, fmt, run_simulation
from .config import PRESETS, SCHEMES, ConfigError, SimConfig, load_config, load_preset
from .discretization import CFLError, LayoutError, MeshError
from .material import MaterialError
from .weights import WeightError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_COMPARE = 0, 1, 2, 3

log = logging.getLogger("dispersive_cq")


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--preset", choices=PRESETS, help="packaged configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispersive-cq",
        description="1D Maxwell pulses in multipole Debye media (ADE and convolution quadrature).",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scheme and write CSV output")
    _add_source(sim)
    sim.add_argument("--scheme", choices=SCHEMES)
    sim.add_argument("--steps", type=int)
    sim.add_argument("--dump-weights", type=Path, metavar="PATH")

    cmp_ = sub.add_parser("compare", help="run schemes in lockstep and diff them")
    _add_source(cmp_)
    cmp_.add_argument("--schemes", default="ade,cq-direct")
    cmp_.add_argument("--tol", type=float)
    cmp_.add_argument("--steps", type=int)

    cfl = sub.add_parser("cfl", help="print the largest stable time step")
    _add_source(cfl)
    return parser


def _load(args) -> SimConfig:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("give exactly one of --config, --preset")
    if args.config is not None:
        return load_config(args.config)
    return load_preset(args.preset, Path.cwd())


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        config = _load(args)
        if getattr(args, "steps", None) is not None and args.steps < 0:
            raise ConfigError("--steps: must be >= 0")
        if args.command == "cfl":
            problem = build_problem(config)
            print(f"tau_max {fmt(problem.tau_max)}")
            print(f"tau {fmt(problem.tau)}")
            return EXIT_OK
        if args.command == "simulate":
            result = run_simulation(config, args.scheme, args.steps, args.dump_weights)
            for key, value in result.summary().items():
                print(f"{key} {value}")
            print(f"energy_csv {result.energy_path}")
            print(f"plot_script {result.plot_path}")
            return EXIT_OK
        schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
        for s in schemes:
            if s not in SCHEMES:
                raise ConfigError(f"--schemes: unknown scheme {s!r}")
        if len(schemes) < 2:
            raise ConfigError("--schemes: need at least two schemes")
        report = compare_schemes(config, schemes, args.tol, args.steps)
        for name, value in report.relative.items():
            print(f"max_rel_diff_{name} {fmt(value)}")
        print(f"tolerance {fmt(report.tolerance)}")
        print(f"verdict {'PASS' if report.passed else 'FAIL'}")
        if report.path is not None:
            print(f"comparison_csv {report.path}")
        return EXIT_OK if report.passed else EXIT_COMPARE
    except (ConfigError, LayoutError, MeshError, MaterialError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, CFLError, WeightError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
