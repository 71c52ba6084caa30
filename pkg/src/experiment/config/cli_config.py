from .experiment_config import (
    ExperimentConfig,
    create_config,
    parse_float_list,
    parse_prior
)
from ..hypothesis.bounds import BoundParams
from ..hypothesis.nds import ACTION_FAMILIES, SINGLETONS
from ..hypothesis.policies import POLICY_IDS

import argparse


SUBCOMMANDS = ("validate", "solve-game", "bounds", "simulate", "dp-solve", "rate-sweep", "nds", "sandwich")


class UsageError(Exception):
    """Raised instead of exiting when argparse rejects the command line."""

    def __init__(self, message: str, status: int = 2):
        super().__init__(message)
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage()
        raise UsageError(f"{self.prog}: error: {message}")

    def exit(self, status=0, message=None):
        if message:
            self._print_message(message)
        raise UsageError(message or "", status=status)


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--model', type=str, default=None,
                        help='Model JSON file (M, actions, alphabet, kernels)')
    parser.add_argument('--policy', type=str, default=None, choices=POLICY_IDS,
                        help='Policy: pi1, pi2, chernoff or dp (default: $HYPOTEST_POLICY)')
    parser.add_argument('--L', type=str, default=None,
                        help='Comma-separated error penalties, each > 1 (e.g. 100,1000)')
    parser.add_argument('--prior', type=str, default=None,
                        help="'uniform' or a comma-separated probability vector")
    parser.add_argument('--rho-tilde', dest='rho_tilde', type=float, default=None,
                        help='Phase threshold in (0.5, 1) (default: $HYPOTEST_RHO_TILDE)')
    parser.add_argument('--trials', type=int, default=None,
                        help='Monte Carlo trials (default: $HYPOTEST_TRIALS)')
    parser.add_argument('--seed', type=int, default=None,
                        help='Master seed (default: $HYPOTEST_SEED)')
    parser.add_argument('--out', type=str, default=None,
                        help='Output file; stdout when omitted')
    parser.add_argument('--resolution', type=int, default=None,
                        help='DP lattice denominator N (default: $HYPOTEST_RESOLUTION)')
    parser.add_argument('--tol', type=float, default=None,
                        help='Solver tolerance (default: $HYPOTEST_TOL)')
    parser.add_argument('--step-cap', dest='step_cap', type=int, default=None,
                        help='Steps before a trial is capped (default: $HYPOTEST_STEP_CAP)')
    parser.add_argument('--log-level', dest='log_level', type=str, default=None,
                        help='DEBUG, INFO, SUCCESS, WARNING or ERROR (default: $HYPOTEST_LOG_LEVEL)')
    return parser


def _bound_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--K-prime', dest='K_prime', type=float, default=1.0,
                        help="Constant K' of the Chernoff-type lower bound (> 0)")
    parser.add_argument('--K1-prime', dest='K1_prime', type=float, default=0.0)
    parser.add_argument('--K2-prime', dest='K2_prime', type=float, default=0.0)
    parser.add_argument('--K3-prime', dest='K3_prime', type=float, default=0.0)
    parser.add_argument('--delta', type=float, default=None,
                        help='delta in (0, 0.5] (default: 1/log(2ML))')
    parser.add_argument('--iota', type=float, default=None,
                        help='iota in (0, 1) (default: (log L)^(-1/4))')
    parser.add_argument('--b', type=float, default=None,
                        help='Truncation level b > 0 (default: log log(LM))')
    parser.add_argument('--refined', action='store_true',
                        help='Use the refined pi2 upper bound when available')
    return parser


def _nds_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--nds-M', dest='nds_M', type=str, default=None,
                        help='Number of search locations (comma list for rate-sweep)')
    parser.add_argument('--nds-p', dest='nds_p', type=float, default=0.25,
                        help='Size-independent flip probability in (0, 0.5)')
    parser.add_argument('--family', type=str, default=SINGLETONS, choices=ACTION_FAMILIES,
                        help='Inspection family')
    return parser


def setup_cli_parser() -> argparse.ArgumentParser:
    """
    Set up the command line argument parser.

    Returns:
        argparse.ArgumentParser: Parser with one subcommand per pipeline stage
    """
    common, bounds, nds = _common_parser(), _bound_parser(), _nds_parser()
    parser = _Parser(prog='hypothesis-lab',
                     description='Active sequential hypothesis testing: games, bounds, simulation, DP oracle')
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    subparsers.add_parser('validate', parents=[common], help='Check kernels and assumptions')
    subparsers.add_parser('solve-game', parents=[common], help='Solve the information games')
    subparsers.add_parser('bounds', parents=[common, bounds], help='Evaluate every bound')
    subparsers.add_parser('simulate', parents=[common], help='Monte Carlo estimate of a policy')
    subparsers.add_parser('dp-solve', parents=[common], help='Value iteration on the belief simplex')
    sweep = subparsers.add_parser('rate-sweep', parents=[common, nds], help='Rate/reliability points over M')
    sweep.add_argument('--models', type=str, default=None,
                       help='Comma-separated model files; otherwise built from --nds-M/--nds-p/--family')
    subparsers.add_parser('nds', parents=[common, nds], help='Write a noisy-search model file')
    subparsers.add_parser('sandwich', parents=[common, bounds], help='Bounds vs DP oracle vs simulation')
    return parser


def get_experiment_config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """
    Get experiment configuration based on command line arguments.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        ExperimentConfig: Flags override the environment defaults
    """
    models = getattr(args, 'models', None)
    return create_config(
        model_path=args.model,
        policy=args.policy,
        L_values=parse_float_list(args.L) if args.L else None,
        prior=parse_prior(args.prior) if args.prior else None,
        threshold_rho=args.rho_tilde,
        n_trials=args.trials,
        master_seed=args.seed,
        output_path=args.out,
        resolution=args.resolution,
        tol=args.tol,
        step_cap=args.step_cap,
        model_paths=[m for m in models.split(",") if m] if models else None,
        log_level=args.log_level,
    )


def get_bound_params_from_args(args: argparse.Namespace, threshold_rho: float) -> BoundParams:
    return BoundParams(
        K_prime=args.K_prime, K1_prime=args.K1_prime, K2_prime=args.K2_prime, K3_prime=args.K3_prime,
        delta=args.delta, iota=args.iota, b=args.b, threshold_rho=threshold_rho, refined=args.refined,
    )
