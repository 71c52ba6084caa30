from dataclasses import dataclass, field, replace
from dotenv import load_dotenv
from typing import List, Optional, Sequence, Union

import os

from ..hypothesis.errors import PreconditionError
from ..hypothesis.model import BELIEF_TOL
from ..hypothesis.policies import POLICY_IDS
from ..utils import LOG_LEVELS

load_dotenv()

ENV_DEFAULTS = {
    "HYPOTEST_POLICY": "pi2",
    "HYPOTEST_RHO_TILDE": "0.9",
    "HYPOTEST_TRIALS": "1000",
    "HYPOTEST_SEED": "0",
    "HYPOTEST_TOL": "1e-6",
    "HYPOTEST_RESOLUTION": "200",
    "HYPOTEST_STEP_CAP": "1000000",
    "HYPOTEST_LOG_LEVEL": "INFO",
}

PriorSpec = Union[str, List[float]]


@dataclass
class ExperimentConfig:
    model_path: Optional[str] = None
    model_paths: List[str] = field(default_factory=list)
    policy: str = "pi2"
    L_values: List[float] = field(default_factory=lambda: [100.0])
    prior: PriorSpec = "uniform"
    threshold_rho: float = 0.9
    n_trials: int = 1000
    master_seed: int = 0
    output_path: Optional[str] = None
    resolution: int = 200
    tol: float = 1e-6
    step_cap: int = 1_000_000
    log_level: str = "INFO"

    def prior_values(self, num_hypotheses: int) -> List[float]:
        """Explicit prior vector; 'uniform' expands to 1/M per hypothesis."""
        if self.prior == "uniform":
            return [1.0 / num_hypotheses] * num_hypotheses
        if len(self.prior) != num_hypotheses:
            raise PreconditionError(f"Prior has {len(self.prior)} entries but the model has M={num_hypotheses}")
        return list(self.prior)


def _env(name: str) -> str:
    return os.getenv(name, ENV_DEFAULTS[name])


def parse_prior(text: Optional[str]) -> PriorSpec:
    if text is None or text.strip().lower() == "uniform":
        return "uniform"
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise PreconditionError(f"Prior must be 'uniform' or a comma-separated list of numbers, got '{text}'")


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise PreconditionError(f"Expected a comma-separated list of numbers, got '{text}'")


def create_config(model_path: Optional[str] = None, policy: Optional[str] = None,
                  L_values: Optional[Sequence[float]] = None, prior: Optional[PriorSpec] = None,
                  threshold_rho: Optional[float] = None, n_trials: Optional[int] = None,
                  master_seed: Optional[int] = None, output_path: Optional[str] = None,
                  resolution: Optional[int] = None, tol: Optional[float] = None,
                  step_cap: Optional[int] = None, model_paths: Optional[Sequence[str]] = None,
                  log_level: Optional[str] = None) -> ExperimentConfig:
    """
    Create an experiment configuration; unset values fall back to the environment defaults.

    Args:
        model_path (str): Path of the model JSON file
        policy (str): One of pi1, pi2, chernoff, dp
        L_values (list): Error penalties, each > 1

    Returns:
        ExperimentConfig: Validated configuration

    Raises:
        PreconditionError: If a value is out of range or a referenced file does not exist
    """
    config = replace(
        get_default_config(),
        **{key: value for key, value in {
            "model_path": model_path,
            "policy": policy,
            "L_values": list(L_values) if L_values is not None else None,
            "prior": prior,
            "threshold_rho": threshold_rho,
            "n_trials": n_trials,
            "master_seed": master_seed,
            "output_path": output_path,
            "resolution": resolution,
            "tol": tol,
            "step_cap": step_cap,
            "model_paths": list(model_paths) if model_paths is not None else None,
            "log_level": log_level.upper() if log_level is not None else None,
        }.items() if value is not None}
    )

    if config.policy not in POLICY_IDS:
        raise PreconditionError(f"Unsupported policy: {config.policy}. Expected one of: {', '.join(POLICY_IDS)}")
    if not config.L_values or any(not L > 1 for L in config.L_values):
        raise PreconditionError(f"Every L must be greater than 1, got {config.L_values}")
    if not 0.5 < config.threshold_rho < 1:
        raise PreconditionError(f"rho-tilde must be in (0.5, 1), got {config.threshold_rho}")
    if config.n_trials < 1:
        raise PreconditionError(f"trials must be at least 1, got {config.n_trials}")
    if config.resolution < 10:
        raise PreconditionError(f"resolution must be at least 10, got {config.resolution}")
    if not config.tol > 0:
        raise PreconditionError(f"tol must be positive, got {config.tol}")
    if config.step_cap < 1:
        raise PreconditionError(f"step cap must be at least 1, got {config.step_cap}")
    if config.log_level not in LOG_LEVELS:
        raise PreconditionError(f"Unsupported log level: {config.log_level}. Expected one of: {', '.join(LOG_LEVELS)}")
    for path in ([config.model_path] if config.model_path else []) + config.model_paths:
        if not os.path.exists(path):
            raise PreconditionError(f"Model file not found: {path}")
    if config.prior != "uniform":
        if any(p < 0 for p in config.prior) or abs(sum(config.prior) - 1.0) > BELIEF_TOL:
            raise PreconditionError(f"Prior must be a probability vector, got {config.prior}")

    return config


def get_default_config() -> ExperimentConfig:
    """Returns a configuration based on environment variables"""
    try:
        return ExperimentConfig(
            policy=_env("HYPOTEST_POLICY"),
            threshold_rho=float(_env("HYPOTEST_RHO_TILDE")),
            n_trials=int(_env("HYPOTEST_TRIALS")),
            master_seed=int(_env("HYPOTEST_SEED")),
            tol=float(_env("HYPOTEST_TOL")),
            resolution=int(_env("HYPOTEST_RESOLUTION")),
            step_cap=int(_env("HYPOTEST_STEP_CAP")),
            log_level=_env("HYPOTEST_LOG_LEVEL").upper(),
        )
    except ValueError as e:
        raise PreconditionError(f"Invalid HYPOTEST_* environment value: {e}")
