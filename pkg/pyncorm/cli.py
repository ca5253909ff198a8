import argparse
import logging
import pathlib
import sys
from typing import List, Optional

import numpy as np

from .cv.main import lps_cross_validation, write_lps
from .datamodel.main import RunConfig, SimulationSpec
from .errors import EXIT_CODES, ConfigError, PyncormError
from .estimator.main import exponential_check
from .fit.main import fit
from .load.main import ingest_csv, load_archive
from .predict.main import predict
from .sampler.geweke import geweke_check
from .simulate.main import simulate_dataset, write_dataset

logger = logging.getLogger("pyncorm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyncorm", description="Density regression with normalized compound random measure mixtures."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    parser.add_argument("-q", "--quiet", action="store_true", help="Hide progress bars.")
    commands = parser.add_subparsers(dest="command", required=True)

    command = commands.add_parser("fit", help="Run the sampler and write a sample archive.")
    command.add_argument("--data", required=True, type=pathlib.Path, help="CSV file with a header row.")
    command.add_argument("--config", type=pathlib.Path, help="Key-value config file.")
    command.add_argument("--output", type=pathlib.Path, help="Archive directory (default: output.directory).")

    command = commands.add_parser("predict", help="Evaluate the predictive density on a grid.")
    command.add_argument("--archive", required=True, type=pathlib.Path, help="Archive directory from `fit`.")
    command.add_argument("--data", required=True, type=pathlib.Path, help="The training CSV file.")
    command.add_argument("--config", type=pathlib.Path, help="The config file used for the fit.")
    command.add_argument("--output", type=pathlib.Path, help="Output CSV (default: <archive>/predictive.csv).")

    command = commands.add_parser("simulate", help="Write a simulated benchmark data set.")
    command.add_argument("--kind", choices=["I", "II", "III"], required=True)
    command.add_argument("--sigma", type=float, default=0.5, help="Component SD (I, II).")
    command.add_argument("--r", type=float, default=1.0, help="Rate of change of the weights (I).")
    command.add_argument("--a", type=float, default=0.0, help="Start of the sine support (III).")
    command.add_argument("--b", type=float, default=1.0, help="End of the sine support (III).")
    command.add_argument("--c", type=int, choices=[0, 1], default=0, help="Add mean jumps (III).")
    command.add_argument("--d", type=int, choices=[0, 1], default=0, help="Heteroscedastic noise (III).")
    command.add_argument("--n", type=int, default=100, help="Number of observations.")
    command.add_argument("--seed", type=int, default=0)
    command.add_argument("--output", required=True, type=pathlib.Path, help="Output CSV.")

    command = commands.add_parser("cv", help="Cross-validated log-predictive score.")
    command.add_argument("--data", required=True, type=pathlib.Path, help="CSV file with a header row.")
    command.add_argument("--config", type=pathlib.Path, help="Key-value config file.")
    command.add_argument("--folds", type=int, default=10)
    command.add_argument("--seed", type=int, help="Fold and chain seed (default: sampler.seed).")
    command.add_argument("--dataset", default="data", help="Data set label in the results table.")
    command.add_argument("--params", default="", help="Parameter label in the results table.")
    command.add_argument("--output", type=pathlib.Path, help="Results CSV (default: <output.directory>/lps.csv).")

    command = commands.add_parser("check", help="Run the estimator and Geweke validation suites.")
    command.add_argument("--config", type=pathlib.Path, help="Model used by the Geweke test.")
    command.add_argument("--iterations", type=int, default=100_000, help="Geweke draws on each side.")
    command.add_argument("--draws", type=int, default=100_000, help="Estimator draws.")
    command.add_argument("--seed", type=int, default=0)
    return parser


def load_config(path: Optional[pathlib.Path]) -> RunConfig:
    return RunConfig() if path is None else RunConfig.from_file(path)


def run_fit(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    data = ingest_csv(args.data, config.data)
    output = fit(config, data, args.output, quiet=args.quiet or None)
    print(output)
    return 0


def run_predict(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    data = ingest_csv(args.data, config.data)
    archive = load_archive(args.archive)
    output = predict(archive, config, data, args.output or args.archive / "predictive.csv", quiet=args.quiet or None)
    print(output)
    return 0


def run_simulate(args: argparse.Namespace) -> int:
    try:
        spec = SimulationSpec(kind=args.kind, sigma=args.sigma, r=args.r, a=args.a, b=args.b, c=args.c, d=args.d)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if args.n < 2:
        raise ConfigError(f"--n must be at least 2, got {args.n}.")
    data = simulate_dataset(spec, args.n, np.random.default_rng(args.seed))
    print(write_dataset(data, args.output))
    return 0


def run_cv(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    data = ingest_csv(args.data, config.data)
    result = lps_cross_validation(config, data, folds=args.folds, seed=args.seed, quiet=args.quiet)
    output = args.output or config.output.directory / "lps.csv"
    write_lps(result, args.dataset, args.params, output)
    print(f"LPS = {result.lps:.4f} (SE {result.se:.4f})")
    return 0


def run_check(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    rng = np.random.default_rng(args.seed)

    estimator = exponential_check(rng, n_draws=args.draws)
    print(
        f"estimator: mean {estimator.mean:.6f} (exact {estimator.expected_mean:.6f}, z = {estimator.z:.2f}), "
        f"variance {estimator.variance:.6f} (exact {estimator.expected_variance:.6f})"
    )

    report = geweke_check(config, args.iterations, rng, quiet=args.quiet)
    print(report.to_frame().to_string(index=False))

    passed = estimator.passed and report.passed
    print("check passed" if passed else "check FAILED")
    return 0 if passed else 1


COMMANDS = {
    "fit": run_fit,
    "predict": run_predict,
    "simulate": run_simulate,
    "cv": run_cv,
    "check": run_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except PyncormError as e:
        logger.error(str(e))
        return next((code for error, code in EXIT_CODES.items() if isinstance(e, error)), 1)
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
