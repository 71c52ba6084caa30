"""
Max-min information games over action mixtures.

The mu games are finite zero-sum games (rows = actions, columns = ordered
pairs of hypotheses) solved exactly as linear programs. The eta games have a
continuum of column strategies (mixtures of alternative hypotheses); they are
solved by column generation: a restricted matrix game gives an upper value,
and a certified inner minimization over the mixture simplex gives the lower
value of the current action mixture.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from scipy.optimize import linprog
from scipy.special import expit, rel_entr

import numpy as np
import math

from .errors import PreconditionError
from .model import LN2, Model, validate
from ..utils import format_value, logger


DEFAULT_TOL = 1e-6
SIMPLEX_TOL = 1e-10
MAX_ROUNDS = 200
INNER_MAX_ITER = 20000
BA_MAX_ITER = 100000
TINY = 1e-300


@dataclass(frozen=True, eq=False)
class ActionMixture:
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1 or weights.size < 1:
            raise PreconditionError("An action mixture must be a non-empty vector")
        if np.any(weights < -SIMPLEX_TOL) or abs(weights.sum() - 1.0) > SIMPLEX_TOL * max(1, weights.size):
            raise PreconditionError(f"Action mixture is not on the simplex: {weights}")
        weights = np.clip(weights, 0.0, None)
        weights = weights / weights.sum()
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, num_actions: int, action: int) -> "ActionMixture":
        weights = np.zeros(num_actions)
        weights[action] = 1.0
        return cls(weights)

    @classmethod
    def from_solver(cls, weights) -> "ActionMixture":
        weights = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(weights / weights.sum())

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    best_response_gap: float
    converged: bool

    @classmethod
    def combine(cls, reports: Sequence["SolverReport"], tol: float) -> "SolverReport":
        gap = max(r.best_response_gap for r in reports)
        return cls(iterations=sum(r.iterations for r in reports), best_response_gap=gap,
                   converged=all(r.converged for r in reports) and gap <= tol)


@dataclass(frozen=True, eq=False)
class MatrixGameSolution:
    """Row player maximizes; `value` is the guaranteed payoff of `row`, `gap` its certified distance to the game value."""
    row: np.ndarray
    column: np.ndarray
    value: float
    upper: float
    gap: float
    iterations: int


class MuSolution(NamedTuple):
    mu0: ActionMixture
    mu: List[ActionMixture]
    i_mu0: float
    d_mu: np.ndarray
    report: SolverReport


class EtaSolution(NamedTuple):
    eta0: ActionMixture
    eta: List[ActionMixture]
    i_eta0: float
    i_eta_threshold: float
    i_2: float
    d_eta: np.ndarray
    report: SolverReport


class CapacitySolution(NamedTuple):
    i_max: float
    action: int
    report: SolverReport


@dataclass
class GameQuantities:
    mu0: ActionMixture
    mu: List[ActionMixture]
    eta0: ActionMixture
    eta: List[ActionMixture]
    i_mu0: float
    i_1: float
    d_mu: np.ndarray
    i_eta0: float
    i_eta_threshold: float
    i_2: float
    d_eta: np.ndarray
    i_max: float
    i_max_action: int
    d_max: float
    xi: float
    d1_harmonic: float
    d2_harmonic: float
    threshold_rho: float
    pair_max_divergence: np.ndarray
    reports: Dict[str, SolverReport] = field(default_factory=dict)

    @property
    def num_hypotheses(self) -> int:
        return len(self.d_mu)

    @property
    def num_actions(self) -> int:
        return len(self.mu0)

    @property
    def converged(self) -> bool:
        return all(report.converged for report in self.reports.values())

    def as_row(self) -> Dict[str, object]:
        row = {
            "M": self.num_hypotheses,
            "K": self.num_actions,
            "threshold_rho": self.threshold_rho,
            "mu0": self.mu0.weights,
        }
        for i, mixture in enumerate(self.mu):
            row[f"mu_{i}"] = mixture.weights
        row["eta0"] = self.eta0.weights
        for i, mixture in enumerate(self.eta):
            row[f"eta_{i}"] = mixture.weights
        row.update({
            "i_mu0": self.i_mu0,
            "i_1": self.i_1,
        })
        for i, value in enumerate(self.d_mu):
            row[f"d_mu_{i}"] = float(value)
        row.update({
            "i_eta0": self.i_eta0,
            "i_eta_threshold": self.i_eta_threshold,
            "i_2": self.i_2,
        })
        for i, value in enumerate(self.d_eta):
            row[f"d_eta_{i}"] = float(value)
        row.update({
            "i_max": self.i_max,
            "i_max_action": self.i_max_action,
            "d_max": self.d_max,
            "xi": self.xi,
            "d1_harmonic": self.d1_harmonic,
            "d2_harmonic": self.d2_harmonic,
        })
        for name, report in self.reports.items():
            row[f"{name}_gap"] = report.best_response_gap
            row[f"{name}_converged"] = report.converged
        return row


def _cap_infinite(payoff: np.ndarray) -> np.ndarray:
    if np.all(np.isfinite(payoff)):
        return payoff
    finite = payoff[np.isfinite(payoff)]
    cap = 1e3 * max(float(finite.max()) if finite.size else 0.0, 1.0)
    logger.warning(f"Infinite divergences in the payoff matrix capped at {cap:g}")
    return np.where(np.isfinite(payoff), payoff, cap)


def solve_matrix_game(payoff) -> MatrixGameSolution:
    """
    Resolve um jogo de soma zero finito (linha maximiza) por programação linear.

    Args:
        payoff (numpy.ndarray): Matriz (ações x colunas) de ganhos do jogador linha

    Returns:
        MatrixGameSolution: Estratégias mistas, valor garantido e gap certificado
    """
    payoff = _cap_infinite(np.atleast_2d(np.asarray(payoff, dtype=float)))
    K, C = payoff.shape

    # Row player: max v s.t. v <= lambda^T P[:, c] for every column c.
    row_lp = linprog(
        c=np.r_[np.zeros(K), -1.0],
        A_ub=np.c_[-payoff.T, np.ones(C)],
        b_ub=np.zeros(C),
        A_eq=np.r_[np.ones(K), 0.0][None, :],
        b_eq=[1.0],
        bounds=[(0, None)] * K + [(None, None)],
        method="highs",
    )
    # Column player: min w s.t. (P y)_a <= w for every action a.
    column_lp = linprog(
        c=np.r_[np.zeros(C), 1.0],
        A_ub=np.c_[payoff, -np.ones(K)],
        b_ub=np.zeros(K),
        A_eq=np.r_[np.ones(C), 0.0][None, :],
        b_eq=[1.0],
        bounds=[(0, None)] * C + [(None, None)],
        method="highs",
    )
    if row_lp.status != 0 or column_lp.status != 0:
        raise RuntimeError(f"Matrix game LP failed: {row_lp.message} / {column_lp.message}")

    row = np.clip(row_lp.x[:K], 0.0, None)
    row /= row.sum()
    column = np.clip(column_lp.x[:C], 0.0, None)
    column /= column.sum()

    value = float(np.min(row @ payoff))
    upper = float(np.max(payoff @ column))
    iterations = int(getattr(row_lp, "nit", 0)) + int(getattr(column_lp, "nit", 0))
    return MatrixGameSolution(row=row, column=column, value=value, upper=upper,
                              gap=max(upper - value, 0.0), iterations=iterations)


def _check_assumption1(model: Model, caller: str):
    report = validate(model)
    if not report.assumption1:
        logger.warning(f"{caller}: indistinguishable pairs {report.indistinguishable_pairs}; game values will be 0")


def solve_mu(model: Model, tol: float = DEFAULT_TOL) -> MuSolution:
    """
    mu0 maximizes min over ordered pairs (i, j) of sum_a lambda_a D(q_i^a || q_j^a);
    mu_i restricts the pairs to first coordinate i.
    """
    _check_assumption1(model, "solve_mu")
    M = model.num_hypotheses
    D = model.divergences
    pairs = [(i, j) for i in range(M) for j in range(M) if i != j]

    reports = []
    full = solve_matrix_game(np.stack([D[:, i, j] for i, j in pairs], axis=1))
    reports.append(SolverReport(full.iterations, full.gap, full.gap <= tol))

    mu, d_mu = [], np.empty(M)
    for i in range(M):
        game = solve_matrix_game(np.stack([D[:, i, j] for j in range(M) if j != i], axis=1))
        reports.append(SolverReport(game.iterations, game.gap, game.gap <= tol))
        mu.append(ActionMixture.from_solver(game.row))
        d_mu[i] = min(float(game.row @ D[:, i, j]) for j in range(M) if j != i)

    report = SolverReport.combine(reports, tol)
    _log_report("mu games", report)
    return MuSolution(mu0=ActionMixture.from_solver(full.row), mu=mu, i_mu0=full.value, d_mu=d_mu, report=report)


class _InnerResult(NamedTuple):
    value: float
    lower: float
    weights: np.ndarray
    iterations: int


def _mixture_objective(model: Model, i: int, lam: np.ndarray, pinned: Optional[int], pin_weight: float):
    """
    f(v) = sum_a lam_a D(q_i^a || sum_j w_j q_j^a) over j != i, with
    w = pin_weight * e_pinned + (1 - pin_weight) * v. Returns (evaluate, others).
    """
    others = [j for j in range(model.num_hypotheses) if j != i]
    active = lam > 0
    lam_a = lam[active]
    qi = model.kernels[active, i, :]
    alternatives = model.kernels[active][:, others, :]
    scale = 1.0 - pin_weight
    base = pin_weight * alternatives[:, pinned, :] if pinned is not None else 0.0

    def evaluate(v):
        mixture = base + scale * np.einsum("j,ajz->az", v, alternatives)
        value = float(lam_a @ rel_entr(qi, mixture).sum(axis=-1)) / LN2
        if not math.isfinite(value):
            return math.inf, None
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(qi > 0, qi / mixture, 0.0)
        grad = -scale * np.einsum("a,ajz,az->j", lam_a, alternatives, ratio) / LN2
        return value, grad

    return evaluate, others


def _minimize_on_simplex(evaluate, n: int, tol: float, max_iter: int = INNER_MAX_ITER) -> _InnerResult:
    """
    Exponentiated-gradient descent with backtracking. The lower value is the
    Frank-Wolfe certificate f(v) + min_j g_j - g.v, valid for convex f.
    """
    uniform = np.full(n, 1.0 / n)
    f, g = evaluate(uniform)
    if not math.isfinite(f):
        return _InnerResult(math.inf, math.inf, uniform, 0)

    v = uniform
    if n > 1:
        start = 0.9 * np.eye(n)[int(np.argmin(g))] + 0.1 * uniform
        fs, gs = evaluate(start)
        if fs < f:
            v, f, g = start, fs, gs

    lower = -math.inf
    step = 1.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        lower = max(lower, f + float(g.min()) - float(g @ v))
        if f - lower <= tol:
            break

        log_v = np.log(np.maximum(v, TINY))
        accepted = False
        while step > 1e-12:
            logits = log_v - step * (g - g.min())
            candidate = np.exp(logits - logits.max())
            candidate /= candidate.sum()
            fc, gc = evaluate(candidate)
            divergence = float(rel_entr(candidate, v).sum())
            if math.isfinite(fc) and fc <= f + float(g @ (candidate - v)) + divergence / step + 1e-15 * abs(f):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        v, f, g = candidate, fc, gc
        step *= 2.0

    return _InnerResult(f, max(lower, 0.0), v, iterations)


def inner_minimum(model: Model, i: int, lam: np.ndarray, tol: float = DEFAULT_TOL,
                  pinned: Optional[int] = None, pin_weight: float = 0.0) -> _InnerResult:
    """
    min over mixtures w of the alternatives j != i of sum_a lam_a D(q_i^a || sum_j w_j q_j^a).
    With `pinned` = k (a hypothesis index != i), the mixture is constrained to w_k >= pin_weight.
    Returned weights are over all M hypotheses (zero at i).
    """
    lam = np.asarray(lam, dtype=float)
    pinned_position = None
    if pinned is not None:
        if pinned == i:
            raise PreconditionError("The pinned hypothesis must differ from the true one")
        pinned_position = pinned if pinned < i else pinned - 1

    evaluate, others = _mixture_objective(model, i, lam, pinned_position, pin_weight)
    result = _minimize_on_simplex(evaluate, len(others), tol)

    weights = np.zeros(model.num_hypotheses)
    weights[others] = (1.0 - pin_weight) * result.weights
    if pinned is not None:
        weights[pinned] += pin_weight
    return result._replace(weights=weights)


def _mixture_column(model: Model, i: int, weights: np.ndarray) -> np.ndarray:
    mixture = np.einsum("j,ajz->az", weights, model.kernels)
    return rel_entr(model.kernels[:, i, :], mixture).sum(axis=-1) / LN2


def _solve_mixture_game(model: Model, hypotheses: Sequence[int], tol: float, max_rounds: int = MAX_ROUNDS):
    """
    max over lambda of min over i in `hypotheses` and mixtures w of sum_a lambda_a D(q_i^a || q_w^a).
    Returns (lambda, certified lower value, SolverReport).
    """
    D = model.divergences
    M = model.num_hypotheses
    columns = [D[:, i, j] for i in hypotheses for j in range(M) if j != i]

    best_lower, best_lam = -math.inf, None
    upper = math.inf
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        restricted = solve_matrix_game(np.stack(columns, axis=1))
        upper = min(upper, restricted.upper)
        lam = restricted.row
        if best_lam is None:
            best_lam = lam

        lower = math.inf
        new_columns = []
        for i in hypotheses:
            inner = inner_minimum(model, i, lam, tol=tol / 10)
            lower = min(lower, inner.lower)
            if inner.value < restricted.value - tol / 2:
                new_columns.append(_mixture_column(model, i, inner.weights))

        if lower > best_lower:
            best_lower, best_lam = lower, lam
        if upper - best_lower <= tol or not new_columns:
            break
        columns.extend(new_columns)

    gap = max(upper - best_lower, 0.0) if math.isfinite(upper) else 0.0
    return best_lam, best_lower, SolverReport(rounds, gap, gap <= tol)


def solve_eta(model: Model, L: float, threshold_rho: float, tol: float = DEFAULT_TOL,
              d_mu: Optional[np.ndarray] = None) -> EtaSolution:
    """
    eta0 maximizes min over i and over mixtures of the alternatives; eta_i fixes i.
    The threshold quantity evaluates eta_k against every i != k with the mixture
    constrained to put weight at least `threshold_rho` on k.

    The belief region P_L is relaxed to the whole mixture simplex, which can only
    lower the reported values; `L` is kept for that region's definition.
    """
    if not L > 1:
        raise PreconditionError(f"L must be greater than 1, got {L}")
    if not 0.5 < threshold_rho < 1:
        raise PreconditionError(f"threshold_rho must be in (0.5, 1), got {threshold_rho}")
    _check_assumption1(model, "solve_eta")

    M = model.num_hypotheses
    reports = []

    eta, d_eta = [], np.empty(M)
    for i in range(M):
        lam, value, report = _solve_mixture_game(model, [i], tol)
        eta.append(ActionMixture.from_solver(lam))
        d_eta[i] = value
        reports.append(report)

    lam0, i_eta0, report0 = _solve_mixture_game(model, list(range(M)), tol)
    reports.append(report0)

    i_eta_threshold = math.inf
    for k in range(M):
        for i in range(M):
            if i == k:
                continue
            inner = inner_minimum(model, i, eta[k].weights, tol=tol / 10, pinned=k, pin_weight=threshold_rho)
            i_eta_threshold = min(i_eta_threshold, inner.lower)

    # Certified values are lower bounds; clamp so the ordering i_2 <= d_eta <= d_mu holds exactly.
    if d_mu is None:
        d_mu = solve_mu(model, tol).d_mu
    d_eta = np.minimum(d_eta, d_mu)
    i_eta0 = min(i_eta0, float(d_eta.min()))

    report = SolverReport.combine(reports, tol)
    _log_report("eta games", report)
    return EtaSolution(eta0=ActionMixture.from_solver(lam0), eta=eta, i_eta0=i_eta0,
                       i_eta_threshold=i_eta_threshold, i_2=min(i_eta0, i_eta_threshold),
                       d_eta=d_eta, report=report)


def _channel_capacity(rows: np.ndarray, tol: float, max_iter: int = BA_MAX_ITER):
    """Blahut-Arimoto on one action; returns (upper certificate, lower value, iterations)."""
    M = rows.shape[0]
    r = np.full(M, 1.0 / M)
    upper, lower = math.inf, 0.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        output = r @ rows
        d = rel_entr(rows, output[None, :]).sum(axis=-1) / LN2
        weighted = r * np.exp2(d)
        lower = float(np.log2(weighted.sum()))
        upper = float(d.max())
        if upper - lower <= tol:
            break
        r = weighted / weighted.sum()
    return max(upper, 0.0), max(lower, 0.0), iterations


def solve_i_max(model: Model, tol: float = DEFAULT_TOL) -> CapacitySolution:
    """
    I_max = max over actions of the capacity of the hypothesis-to-symbol channel.
    The upper certificate max_i D(q_i || q_out) is reported.
    """
    best_value, best_action = -math.inf, 0
    gaps, iterations = [], 0
    for a in range(model.num_actions):
        upper, lower, steps = _channel_capacity(model.kernels[a], tol)
        gaps.append(upper - lower)
        iterations += steps
        if upper > best_value:
            best_value, best_action = upper, a

    gap = max(gaps)
    report = SolverReport(iterations, gap, gap <= tol)
    _log_report("capacity", report)
    return CapacitySolution(i_max=best_value, action=best_action, report=report)


def compute_i1(model: Model, quantities: Union[GameQuantities, MuSolution]) -> float:
    """I_1 = ((log M + 4 xi) / min_i min_{j != i} mu_j . D(q_i || q_j))^(-2) * I_mu0."""
    M = model.num_hypotheses
    xi = model.xi
    if not math.isfinite(xi) or quantities.i_mu0 <= 0:
        return 0.0
    D = model.divergences
    inner = min(float(quantities.mu[j].weights @ D[:, i, j]) for i in range(M) for j in range(M) if i != j)
    if not math.isfinite(inner):
        return 0.0
    return (inner / (math.log2(M) + 4.0 * xi)) ** 2 * quantities.i_mu0


def alpha(L: float, M: int, i_max: float) -> float:
    """(M-1) / (M-1 + 2^(L i_max)), evaluated through the logistic function."""
    if not L > 0:
        raise PreconditionError(f"L must be positive, got {L}")
    if M < 2:
        raise PreconditionError(f"M must be at least 2, got {M}")
    return float(expit(LN2 * (math.log2(M - 1) - L * i_max)))


def harmonic_mean(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        return 0.0
    return float(values.size / np.sum(1.0 / values))


def compute_quantities(model: Model, threshold_rho: float = 0.9, L: float = 2.0,
                       tol: float = DEFAULT_TOL) -> GameQuantities:
    mu = solve_mu(model, tol)
    eta = solve_eta(model, L, threshold_rho, tol, d_mu=mu.d_mu)
    capacity = solve_i_max(model, tol)

    quantities = GameQuantities(
        mu0=mu.mu0, mu=mu.mu, eta0=eta.eta0, eta=eta.eta,
        i_mu0=mu.i_mu0, i_1=compute_i1(model, mu), d_mu=mu.d_mu,
        i_eta0=eta.i_eta0, i_eta_threshold=eta.i_eta_threshold, i_2=eta.i_2, d_eta=eta.d_eta,
        i_max=capacity.i_max, i_max_action=capacity.action,
        d_max=model.d_max, xi=model.xi,
        d1_harmonic=harmonic_mean(mu.d_mu), d2_harmonic=harmonic_mean(eta.d_eta),
        threshold_rho=threshold_rho,
        pair_max_divergence=np.max(model.divergences, axis=0),
        reports={"mu": mu.report, "eta": eta.report, "i_max": capacity.report},
    )
    logger.info(f"Game quantities: i_2={format_value(quantities.i_2)} i_max={format_value(quantities.i_max)}")
    return quantities


@dataclass(frozen=True)
class Order2Check:
    slack: np.ndarray
    holds: bool


def order2_condition(model: Model, quantities: GameQuantities, tol: float = 1e-3) -> Order2Check:
    """Per-hypothesis slack min_{j != i} max_a D(q_i^a || q_j^a) - D_eta_i; zero slack everywhere gives order-2 optimality of pi2."""
    D = model.divergences
    M = model.num_hypotheses
    best = np.array([min(float(D[:, i, j].max()) for j in range(M) if j != i) for i in range(M)])
    slack = best - np.asarray(quantities.d_eta)
    return Order2Check(slack=slack, holds=bool(np.all(np.abs(slack) <= tol)))


@dataclass(frozen=True)
class FamilyLimits:
    d_max_sup: float
    d_max_inf: float
    i_max_sup: float
    i_max_inf: float
    i2_inf: float
    d2_inf: float
    xi_sup: float


def family_limits(quantities_family: Union[Mapping[int, GameQuantities], Sequence[GameQuantities]]) -> FamilyLimits:
    """Sup/inf of the per-M quantities over a family of models indexed by M."""
    family = list(quantities_family.values()) if isinstance(quantities_family, Mapping) else list(quantities_family)
    if not family:
        raise PreconditionError("An empty model family has no limit quantities")
    d_max = [q.d_max for q in family]
    i_max = [q.i_max for q in family]
    return FamilyLimits(
        d_max_sup=max(d_max), d_max_inf=min(d_max),
        i_max_sup=max(i_max), i_max_inf=min(i_max),
        i2_inf=min(q.i_2 for q in family),
        d2_inf=min(q.d2_harmonic for q in family),
        xi_sup=max(q.xi for q in family),
    )


def _log_report(name: str, report: SolverReport):
    if report.converged:
        logger.info(f"{name}: converged, gap={report.best_response_gap:.3g} after {report.iterations} iterations")
    else:
        logger.warning(f"{name}: gap {report.best_response_gap:.3g} above tolerance after {report.iterations} iterations")
