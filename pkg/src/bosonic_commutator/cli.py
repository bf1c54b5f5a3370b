"""Command-line driver.

    bosonic-commutator scan  --config cfg.json --out results/scan
    bosonic-commutator tomo  --config cfg.json --out results/tomo --phi 3.14159
    bosonic-commutator kfit  --config cfg.json --out results/kfit --samples 250000
    bosonic-commutator validate --config cfg.json

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig
from .estimation import FitError
from .fock import HeraldingError, TruncationError
from .pipeline import run_kfit, run_phase_scan, run_tomography
from .tomography import ReconstructionError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("bosonic_commutator")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config (defaults used if omitted)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for independent phase points")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bosonic-commutator", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scan", parents=[common], help="histograms across the superposition phase")

    tomo = sub.add_parser("tomo", parents=[common], help="MLE reconstruction and Wigner functions")
    tomo.add_argument("--phi", type=float, default=math.pi, help="superposition phase in radians")
    tomo.add_argument("--samples", type=int, help="quadrature samples (default 1e4 at phi=0, else 1e5)")
    tomo.add_argument("--levels", type=int, help="Fock levels reconstructed (default 11 at phi=0, else 14)")
    tomo.add_argument("--no-eta-correction", action="store_true",
                      help="reconstruct with an ideal detector instead of eta_d")

    kfit = sub.add_parser("kfit", parents=[common], help="fit the commutator constant K")
    kfit.add_argument("--samples", type=int, help="quadrature samples (default samples_per_phase)")
    kfit.add_argument("--k-range", type=float, nargs=2, default=(0.1, 5.0), metavar=("LO", "HI"))
    kfit.add_argument("--bootstrap", type=int, default=0, help="bootstrap resamples for sigma_K")

    sub.add_parser("validate", parents=[common], help="check a config and exit")
    return parser


def load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        if args.command in ("tomo", "kfit") and args.samples is not None and args.samples < 1:
            raise ConfigError(["samples: must be an integer >= 1"])
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate":
            print("config OK")
        elif args.command == "scan":
            points = run_phase_scan(config, args.out, threads=args.threads)
            for pt in points:
                print(f"phi={pt.phi:.4f}  total={pt.histogram.total}  overflow={pt.histogram.overflow}  "
                      f"fringe={pt.fringe_rate:.3f}")
        elif args.command == "tomo":
            run = run_tomography(config, args.phi, args.out, samples=args.samples, levels=args.levels,
                                 correct_efficiency=not args.no_eta_correction)
            print(f"phi={run.phi:.4f}  fidelity(out, in)={run.fidelity:.5f}  W(0,0)={run.wigner_origin:.5f}")
        elif args.command == "kfit":
            result = run_kfit(config, args.out, samples=args.samples, k_range=tuple(args.k_range),
                              bootstrap=args.bootstrap)
            print(result.formatted())
    except (HeraldingError, TruncationError, FitError, ReconstructionError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
