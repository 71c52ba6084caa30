"""
Reproducible Monte Carlo engine. Trial k of a run with master seed s draws all
of its randomness (true hypothesis, actions, observations) from
default_rng(SeedSequence(s, spawn_key=(k,))), so any trial can be replayed alone
and the aggregate does not depend on the order trials are run in.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Union

from scipy.stats import beta as beta_dist

import pandas as pd
import numpy as np
import math

from .bounds import BoundParams, submartingale_stopping_bound, ub_v2bar
from .errors import PreconditionError
from .games import GameQuantities, compute_quantities
from .model import TINY_MARGINAL, Belief, Model, posterior_probs
from .policies import Policy, PolicyConfig, make_policy
from ..utils import logger


DEFAULT_STEP_CAP = 1_000_000
Z_95 = 1.96
PE_CONFIDENCE = 0.95
PROGRESS_BATCH = 1000
MIN_PHASE_STEPS = 100
ROUNDING_SLACK = 1e-12

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial,)))


def rng_identity() -> str:
    return f"numpy-{np.__version__}/PCG64/SeedSequence(master_seed,spawn_key=(trial,))"


def _generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _draw(rng: np.random.Generator, probs: np.ndarray) -> int:
    index = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    return min(index, probs.size - 1)


@dataclass(frozen=True)
class TrialRecord:
    true_theta: int
    tau: int
    declared: Optional[int]
    correct: bool
    capped: bool
    final_belief: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


def run_trial(model: Model, policy: Policy, L: float, true_theta: int, prior: Belief,
              seed: SeedLike, step_cap: int = DEFAULT_STEP_CAP) -> TrialRecord:
    """
    Executa um único ensaio: decide, amostra a ação e a observação, atualiza a crença.
    Um ensaio que atinge `step_cap` é marcado como capped e contado como erro.
    """
    if step_cap < 1:
        raise PreconditionError(f"step_cap must be at least 1, got {step_cap}")
    if not 0 <= true_theta < model.num_hypotheses:
        raise PreconditionError(f"true_theta out of range: {true_theta}")
    rng = _generator(seed)
    kernels = model.kernels
    probs = prior.probs
    tau = 0

    while True:
        decision = policy.decide(Belief(probs))
        if decision.is_declare:
            return TrialRecord(true_theta=true_theta, tau=tau, declared=decision.hypothesis,
                               correct=decision.hypothesis == true_theta, capped=False, final_belief=probs)
        if tau >= step_cap:
            logger.warning(f"Trial hit the step cap ({step_cap}); counted as an error")
            return TrialRecord(true_theta=true_theta, tau=tau, declared=None, correct=False, capped=True,
                               final_belief=probs)

        action = _draw(rng, decision.mixture.weights)
        symbol = _draw(rng, kernels[action, true_theta])
        posterior, marginal = posterior_probs(kernels, probs, action, symbol)
        if marginal < TINY_MARGINAL:
            logger.warning(f"Observation marginal {marginal:.3g} below {TINY_MARGINAL:g} at step {tau}")
        probs = posterior
        tau += 1


@dataclass
class SimEstimate:
    n_trials: int
    L: float
    master_seed: int
    mean_tau: float
    tau_half_width: float
    n_errors: int
    n_capped: int
    pe: float
    pe_upper: float
    total_cost: float
    cost_half_width: float
    degenerate_ci: bool
    records: List[TrialRecord] = field(default_factory=list, repr=False)

    @property
    def total_cost_upper(self) -> float:
        """Conservative upper estimate: (mean tau + half-width) + L pe_upper."""
        return self.mean_tau + self.tau_half_width + self.L * self.pe_upper

    def as_row(self) -> Dict[str, object]:
        return {
            "n_trials": self.n_trials,
            "L": self.L,
            "mean_tau": self.mean_tau,
            "tau_half_width": self.tau_half_width,
            "n_errors": self.n_errors,
            "n_capped": self.n_capped,
            "pe": self.pe,
            "pe_upper": self.pe_upper,
            "total_cost": self.total_cost,
            "cost_half_width": self.cost_half_width,
            "total_cost_upper": self.total_cost_upper,
            "degenerate_ci": self.degenerate_ci,
        }


def _half_width(samples: np.ndarray) -> float:
    if samples.size < 2:
        return math.inf
    return Z_95 * float(np.std(samples, ddof=1)) / math.sqrt(samples.size)


def pe_upper_bound(n_errors: int, n_trials: int, confidence: float = PE_CONFIDENCE) -> float:
    """Exact one-sided binomial upper bound; 1 - (1 - confidence)^(1/n) when no error was seen."""
    if n_errors >= n_trials:
        return 1.0
    return float(beta_dist.ppf(confidence, n_errors + 1, n_trials - n_errors))


def summarize(records: Sequence[TrialRecord], L: float, master_seed: int) -> SimEstimate:
    n = len(records)
    taus = np.array([r.tau for r in records], dtype=float)
    errors = np.array([not r.correct for r in records])
    costs = taus + L * errors
    n_errors = int(errors.sum())
    degenerate = n < 2
    if degenerate:
        logger.warning("A single trial gives no confidence interval; half-widths reported as infinite")
    return SimEstimate(
        n_trials=n, L=L, master_seed=master_seed,
        mean_tau=float(taus.mean()), tau_half_width=_half_width(taus),
        n_errors=n_errors, n_capped=sum(r.capped for r in records),
        pe=n_errors / n, pe_upper=pe_upper_bound(n_errors, n),
        total_cost=float(costs.mean()), cost_half_width=_half_width(costs),
        degenerate_ci=degenerate, records=list(records),
    )


def estimate(model: Model, policy: Policy, L: float, prior: Belief, n_trials: int, master_seed: int,
             step_cap: int = DEFAULT_STEP_CAP, batch_size: int = PROGRESS_BATCH) -> SimEstimate:
    """
    Estima E[tau], Pe e o custo total E[tau] + L Pe por Monte Carlo.

    Args:
        model (Model): Modelo de observação
        policy (Policy): Política a simular
        L (float): Penalidade por erro
        prior (Belief): Distribuição a priori (também sorteia a hipótese verdadeira)
        n_trials (int): Número de ensaios
        master_seed (int): Semente mestre; o ensaio k usa SeedSequence(master_seed, spawn_key=(k,))

    Returns:
        SimEstimate: Estimativas com intervalos de confiança de 95%
    """
    if n_trials < 1:
        raise PreconditionError(f"n_trials must be at least 1, got {n_trials}")

    records = []
    for k in range(n_trials):
        rng = trial_rng(master_seed, k)
        theta = _draw(rng, prior.probs)
        records.append(run_trial(model, policy, L, theta, prior, rng, step_cap))
        if (k + 1) % batch_size == 0:
            logger.info(f"{policy.policy_id}: {k + 1}/{n_trials} trials")

    result = summarize(records, L, master_seed)
    logger.success(f"{policy.policy_id} at L={L:g}: mean tau {result.mean_tau:.4g} "
                   f"+/- {result.tau_half_width:.3g}, pe {result.pe:.3g} (upper {result.pe_upper:.3g})")
    return result


@dataclass
class PhaseDrift:
    name: str
    steps: int
    empirical_mean: float
    half_width: float
    exact_min: float
    floor: float
    sufficient: bool

    @property
    def holds(self) -> bool:
        return self.sufficient and self.exact_min >= self.floor - ROUNDING_SLACK


@dataclass
class DriftReport:
    """
    Drift of U_n = log(rho_theta / (1 - rho_theta)) - log(rho~ / (1 - rho~)):
    phase 1 (U_n < 0) needs drift >= I_2, phase 2 (U_n >= 0) drift >= D_eta_theta,
    and every increment |U_{n+1} - U_n| <= xi.
    """
    true_theta: int
    phase1: PhaseDrift
    phase2: PhaseDrift
    max_abs_increment: float
    xi: float
    trajectories: int

    @property
    def increments_bounded(self) -> bool:
        return self.max_abs_increment <= self.xi + ROUNDING_SLACK

    @property
    def holds(self) -> bool:
        return self.phase1.holds and self.phase2.holds and self.increments_bounded

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for phase in (self.phase1, self.phase2):
            rows.append({"condition": phase.name, "steps": phase.steps, "empirical_drift": phase.empirical_mean,
                         "half_width": phase.half_width, "exact_min_drift": phase.exact_min,
                         "floor": phase.floor, "sufficient": phase.sufficient, "holds": phase.holds})
        rows.append({"condition": "increments", "steps": self.phase1.steps + self.phase2.steps,
                     "empirical_drift": self.max_abs_increment, "half_width": 0.0, "exact_min_drift": math.nan,
                     "floor": self.xi, "sufficient": True, "holds": self.increments_bounded})
        return pd.DataFrame(rows)


def _increment_table(model: Model, probs: np.ndarray, theta: int) -> np.ndarray:
    """log2(q_theta^a(z) / q_alt^a(z)) with q_alt the belief mixture of the other hypotheses; shape (K, Z)."""
    others = np.delete(probs, theta)
    weights = others / others.sum()
    alternatives = np.delete(model.kernels, theta, axis=1)
    mixture = np.einsum("j,ajz->az", weights, alternatives)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(model.kernels[:, theta, :]) - np.log2(mixture)


def drift_check(model: Model, policy: Policy, config: PolicyConfig, true_theta: int, n_steps: int,
                seed: SeedLike, prior: Optional[Belief] = None,
                min_phase_steps: int = MIN_PHASE_STEPS, max_total_steps: Optional[int] = None) -> DriftReport:
    """
    Runs the policy from `prior` (uniform by default), restarting after every
    declaration, until each phase has `n_steps` steps or `max_total_steps` is reached.
    """
    if not math.isfinite(model.xi):
        raise PreconditionError("Drift conditions need every action's kernels to share a support")
    quantities = config.quantities
    prior = prior or Belief.uniform(model.num_hypotheses)
    max_total_steps = max_total_steps or 50 * n_steps
    rng = _generator(seed)
    kernels = model.kernels
    threshold = math.log2(config.threshold_rho / (1.0 - config.threshold_rho))

    increments = {1: [], 2: []}
    exact_min = {1: math.inf, 2: math.inf}
    max_abs = 0.0
    trajectories = 1
    probs = prior.probs
    u = math.log2(probs[true_theta] / (1.0 - probs[true_theta])) - threshold

    for _ in range(max_total_steps):
        if len(increments[1]) >= n_steps and len(increments[2]) >= n_steps:
            break
        decision = policy.decide(Belief(probs))
        if decision.is_declare:
            probs = prior.probs
            u = math.log2(probs[true_theta] / (1.0 - probs[true_theta])) - threshold
            trajectories += 1
            continue

        phase = 1 if u < 0 else 2
        table = _increment_table(model, probs, true_theta)
        expected = np.sum(kernels[:, true_theta, :] * np.where(kernels[:, true_theta, :] > 0, table, 0.0), axis=1)
        exact_min[phase] = min(exact_min[phase], float(decision.mixture.weights @ expected))

        action = _draw(rng, decision.mixture.weights)
        symbol = _draw(rng, kernels[action, true_theta])
        step = float(table[action, symbol])
        increments[phase].append(step)
        max_abs = max(max_abs, abs(step))
        u += step
        probs, _ = posterior_probs(kernels, probs, action, symbol)

    def phase_report(phase: int, name: str, floor: float) -> PhaseDrift:
        samples = np.asarray(increments[phase])
        sufficient = samples.size >= min_phase_steps
        if not sufficient:
            logger.warning(f"Drift check: only {samples.size} steps in {name}; marked insufficient")
        return PhaseDrift(name=name, steps=int(samples.size),
                          empirical_mean=float(samples.mean()) if samples.size else math.nan,
                          half_width=_half_width(samples), exact_min=exact_min[phase], floor=floor,
                          sufficient=sufficient)

    return DriftReport(
        true_theta=true_theta,
        phase1=phase_report(1, "phase1", quantities.i_2),
        phase2=phase_report(2, "phase2", float(quantities.d_eta[true_theta])),
        max_abs_increment=max_abs, xi=model.xi, trajectories=trajectories,
    )


@dataclass
class SubmartingaleEstimate:
    mean: float
    half_width: float
    n_trials: int
    bound: float


def simulate_submartingale(B: float, U0: float, K1: float, K2: float, K3: float, n_trials: int,
                           master_seed: int, step_cap: int = DEFAULT_STEP_CAP) -> SubmartingaleEstimate:
    """
    Synthetic process with increments K_d +/- (K3 - K_d), each sign with probability 1/2,
    K_d = K1 below zero and K2 at or above zero; stops at the first time U >= B.
    """
    bound = submartingale_stopping_bound(B, U0, K1, K2, K3)
    rng = np.random.default_rng(np.random.SeedSequence(master_seed))
    u = np.full(n_trials, float(U0))
    times = np.zeros(n_trials, dtype=np.int64)
    running = u < B
    for _ in range(step_cap):
        if not running.any():
            break
        drift = np.where(u < 0, K1, K2)
        signs = np.where(rng.random(n_trials) < 0.5, 1.0, -1.0)
        u = np.where(running, u + drift + signs * (K3 - drift), u)
        times += running
        running &= u < B
    times = times.astype(float)
    return SubmartingaleEstimate(mean=float(times.mean()), half_width=_half_width(times),
                                 n_trials=n_trials, bound=bound)


@dataclass
class SlopeResult:
    slope: float
    intercept: float
    frame: pd.DataFrame


def _policy_for(model: Model, policy_id: str, L: float, threshold_rho: float,
                quantities: GameQuantities) -> Policy:
    return make_policy(policy_id, model, PolicyConfig(L=L, threshold_rho=threshold_rho, quantities=quantities))


def slope_check(model: Model, policy_id: str, L_values: Sequence[float], n_trials: int, master_seed: int,
                threshold_rho: float = 0.9, tol: float = 1e-6, quantities: Optional[GameQuantities] = None,
                step_cap: int = DEFAULT_STEP_CAP) -> SlopeResult:
    """Least-squares slope of mean tau against log2 L."""
    if len(L_values) < 2:
        raise PreconditionError("A slope needs at least two values of L")
    quantities = quantities or compute_quantities(model, threshold_rho, max(L_values), tol)
    prior = Belief.uniform(model.num_hypotheses)

    rows = []
    for L in L_values:
        policy = _policy_for(model, policy_id, L, threshold_rho, quantities)
        result = estimate(model, policy, L, prior, n_trials, master_seed, step_cap)
        rows.append({"L": L, "log2_L": math.log2(L), **result.as_row()})

    frame = pd.DataFrame(rows)
    slope, intercept = np.polyfit(frame["log2_L"], frame["mean_tau"], 1)
    return SlopeResult(slope=float(slope), intercept=float(intercept), frame=frame)


def rate_sweep(model_family: Mapping[int, Model], policy_id: str, L: float, n_trials: int, master_seed: int,
               threshold_rho: float = 0.9, tol: float = 1e-6, step_cap: int = DEFAULT_STEP_CAP,
               quantities_family: Optional[Mapping[int, GameQuantities]] = None) -> pd.DataFrame:
    """
    One row per M: R = log2 M / mean tau, E = -log2(pe_upper) / mean tau, next to
    the plain pi2 upper bound at the uniform prior.
    """
    quantities_family = dict(quantities_family or {})
    params = BoundParams(threshold_rho=threshold_rho)
    rows = []
    for M in sorted(model_family):
        model = model_family[M]
        if M not in quantities_family:
            quantities_family[M] = compute_quantities(model, threshold_rho, L, tol)
        quantities = quantities_family[M]
        policy = _policy_for(model, policy_id, L, threshold_rho, quantities)
        prior = Belief.uniform(model.num_hypotheses)
        result = estimate(model, policy, L, prior, n_trials, master_seed, step_cap)

        mean_tau = result.mean_tau
        rows.append({
            "M": M,
            **result.as_row(),
            "R_hat": math.log2(M) / mean_tau if mean_tau > 0 else math.inf,
            "E_hat": -math.log2(result.pe_upper) / mean_tau if mean_tau > 0 else math.inf,
            "ub_v2bar": ub_v2bar(prior, L, quantities, params),
        })
    return pd.DataFrame(rows)
