"""
Explicit lower and upper bounds on the optimal total cost V*(rho) = E[tau] + L Pe.

Every bound is nonnegative. `math.inf` marks a vacuous or infeasible upper
bound; it propagates through sums and is printed as "vacuous". Constants
K', K'_1, K'_2, K'_3 have no closed form here and are supplied by the caller.
"""
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional

import pandas as pd
import numpy as np
import math

from .errors import PreconditionError
from .games import FamilyLimits, GameQuantities, alpha, family_limits
from .model import LOG2E, Belief, Model, binary_entropy, entropy, psi
from ..utils import logger


@dataclass(frozen=True)
class BoundParams:
    """
    Tuning parameters of the bounds. `None` selects the asymptotic default:
    chernoff_delta = (log L)^(-1/3), iota = (log L)^(-1/4),
    delta = min(1/2, 1/log(2ML)), b = log log(LM).
    """
    K_prime: float = 1.0
    K1_prime: float = 0.0
    K2_prime: float = 0.0
    K3_prime: float = 0.0
    delta: Optional[float] = None
    chernoff_delta: Optional[float] = None
    iota: Optional[float] = None
    b: Optional[float] = None
    threshold_rho: float = 0.9
    refined: bool = False

    def __post_init__(self):
        for name in ("K_prime", "K1_prime", "K2_prime", "K3_prime"):
            if getattr(self, name) < 0:
                raise PreconditionError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.delta is not None and not 0 < self.delta <= 0.5:
            raise PreconditionError(f"delta must be in (0, 0.5], got {self.delta}")
        if self.chernoff_delta is not None and not 0 < self.chernoff_delta < 1:
            raise PreconditionError(f"chernoff_delta must be in (0, 1), got {self.chernoff_delta}")
        if self.iota is not None and not 0 < self.iota < 1:
            raise PreconditionError(f"iota must be in (0, 1), got {self.iota}")
        if self.b is not None and not self.b > 0:
            raise PreconditionError(f"b must be positive, got {self.b}")
        if not 0.5 < self.threshold_rho < 1:
            raise PreconditionError(f"threshold_rho must be in (0.5, 1), got {self.threshold_rho}")

    def resolve(self, L: float, M: int) -> "BoundParams":
        """Fills the asymptotic defaults for a given (L, M)."""
        _check_L(L)
        log_l = max(math.log2(L), 1.0)
        return replace(
            self,
            delta=self.delta if self.delta is not None else min(0.5, 1.0 / math.log2(2 * M * L)),
            chernoff_delta=self.chernoff_delta if self.chernoff_delta is not None else min(log_l ** (-1.0 / 3.0), 0.999),
            iota=self.iota if self.iota is not None else min(log_l ** (-0.25), 0.999),
            b=self.b if self.b is not None else math.log2(math.log2(L * M)),
        )


def _check_L(L: float):
    if not L > 1:
        raise PreconditionError(f"L must be greater than 1, got {L}")


def in_region(belief: Belief, L: float) -> bool:
    """Region of interest P_L: min_j (1 - rho_j) L > 1, where sampling can pay off."""
    return float(np.min(1.0 - belief.probs)) * L > 1.0


def _check_region(belief: Belief, L: float):
    if not in_region(belief, L):
        raise PreconditionError(
            f"Belief {belief.probs} lies outside the region of interest P_L "
            f"(min_j (1 - rho_j) L <= 1 at L={L}): stopping at once is optimal there")


def _check_xi(quantities: GameQuantities):
    if not math.isfinite(quantities.xi):
        raise PreconditionError("xi is infinite: the kernels of some action do not share a support")


def _ratio(numerator: float, denominator: float) -> float:
    """numerator / denominator with a zero or negative denominator read as an infinite bound."""
    if numerator == 0:
        return 0.0
    if denominator <= 0:
        return math.inf if numerator > 0 else -math.inf
    return numerator / denominator


def _log_odds(rho: float) -> float:
    return math.log2(rho / (1.0 - rho))


def _positive(x: float) -> float:
    return max(x, 0.0)


def lb_v1(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams) -> float:
    _check_L(L)
    _check_region(belief, L)
    rho = belief.probs
    D = quantities.pair_max_divergence
    M = rho.size
    off_diagonal = ~np.eye(M, dtype=bool)
    if np.any(D[off_diagonal] <= 0):
        i, j = np.argwhere((D <= 0) & off_diagonal)[0]
        raise PreconditionError(
            f"No action separates hypotheses {i} and {j} (max_a D = 0): the lower bound would be infinite")
    log_l = math.log2(L - 1.0)

    total = 0.0
    for i in range(M):
        if rho[i] == 0:
            continue
        best = -math.inf
        for j in range(M):
            if j == i or rho[j] == 0:
                continue
            best = max(best, (log_l - math.log2(rho[i] / rho[j])) / D[i, j])
        if best > -math.inf:
            total += rho[i] * best
    return _positive(total - params.K1_prime)


def lb_chernoff(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams) -> float:
    """Hypotheses with zero prior mass contribute nothing."""
    _check_L(L)
    _check_region(belief, L)
    _check_xi(quantities)
    params = params.resolve(L, belief.num_hypotheses)
    delta = params.chernoff_delta
    if params.K_prime <= 0:
        raise PreconditionError("The Chernoff-type bound needs K' > 0")

    rho = belief.probs
    M = rho.size
    scale = params.K_prime * math.log2(2.0 * L)
    head = (1.0 - delta) * math.log2(L / scale)
    tail = 2.0 * M * (scale / L) ** delta

    total = 0.0
    for i in range(M):
        if rho[i] == 0:
            continue
        worst_ratio = max(math.log2(rho[i] / rho[j]) if rho[j] > 0 else math.inf
                          for j in range(M) if j != i)
        total += _positive(head - worst_ratio) / (quantities.d_mu[i] + delta) * (rho[i] - tail)
    return _positive(total - M * quantities.xi ** 2 / delta ** 2)


def lb_alpha_form(belief: Belief, L: float, M: int, i_max: float) -> float:
    """
    G(rho) = [(H(rho) - h(alpha) - alpha log(M-1)) / I_max + alpha L]^+, with no unknown constants.
    """
    _check_L(L)
    a = alpha(L, M, i_max)
    if i_max <= 0:
        return _positive(a * L)
    head = entropy(belief) - binary_entropy(a) - a * math.log2(M - 1)
    return _positive(head / i_max + a * L)


def _lb_v2_terms(belief: Belief, L: float, quantities: GameQuantities, delta: float, offset: float) -> float:
    rho = belief.probs
    M = rho.size
    head = (entropy(belief) - binary_entropy(delta) - delta * math.log2(M - 1)) / quantities.i_max
    if float(rho.max()) <= 1.0 - delta:
        head += (math.log2(L - 1.0) - math.log2((1.0 - delta) / delta) - offset) / quantities.d_max
    return head


def lb_v2(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams) -> float:
    _check_L(L)
    _check_xi(quantities)
    M = belief.num_hypotheses
    if quantities.i_max <= 0 or not L > math.log2(M) / quantities.i_max:
        raise PreconditionError(
            f"L={L} is below log M / I_max: in this regime randomly guessing the hypothesis is near optimal")
    params = params.resolve(L, M)
    return _positive(_lb_v2_terms(belief, L, quantities, params.delta, quantities.xi) - params.K2_prime)


def lb_uniform_prior(M: int, L: float, limits: FamilyLimits, K2_prime: float = 0.0) -> float:
    """Uniform-prior specialization of lb_v2 with delta = 1/log(2ML), in terms of family limits."""
    _check_L(L)
    if limits.i_max_sup <= 0 or limits.d_max_inf <= 0:
        raise PreconditionError("The uniform-prior bound needs positive I_max and D_max over the family")
    value = ((math.log2(M) - 2.0) / limits.i_max_sup
             + math.log2(L - 1.0) / limits.d_max_sup
             - (math.log2(math.log2(L * M)) + limits.xi_sup) / limits.d_max_inf
             - K2_prime)
    return _positive(value)


def lb_v3(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams, model: Model) -> float:
    _check_L(L)
    M = belief.num_hypotheses
    if quantities.i_max <= 0 or not L > math.log2(M) / quantities.i_max:
        raise PreconditionError(
            f"L={L} is below log M / I_max: in this regime randomly guessing the hypothesis is near optimal")
    params = params.resolve(L, M)
    shrink = psi(model, params.b)
    if math.isinf(shrink):
        return 0.0
    factor = 1.0 / (1.0 + shrink / quantities.d_max)
    return factor * _positive(_lb_v2_terms(belief, L, quantities, params.delta, params.b) - params.K3_prime)


def ub_v1bar(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams) -> float:
    _check_L(L)
    _check_xi(quantities)
    params = params.resolve(L, belief.num_hypotheses)
    i_1 = quantities.i_1
    if i_1 <= 0:
        return math.inf

    rho = belief.probs
    M = rho.size
    iota = params.iota
    xi = quantities.xi
    rho_t = params.threshold_rho

    first = (entropy(belief) + math.log2(M) + _log_odds(rho_t)) / i_1 * (1.0 + iota)
    second = sum(_ratio(rho[i] * math.log2(L), quantities.d_mu[i]) for i in range(M)) * (1.0 + iota)

    # Outside P_L the policy stops at once and costs at most 1.
    base = max(L * (1.0 - float(rho.max())), 1.0)
    exponent = (iota ** 3 / (1.0 + iota) ** 2) * i_1 ** 2 / (4.0 * xi ** 3)
    coefficient = M * (2.0 + 1.0 / (((iota / 2.0) / (1.0 + iota)) ** 5 * (i_1 / (2.0 * xi)) ** 4))
    return first + second + coefficient * base ** (-exponent) + 2.0


def _v2_log_term(belief: Belief, L: float, d_eta: np.ndarray, shift: float = 0.0) -> float:
    rho = belief.probs
    return sum(_ratio(rho[i] * math.log2(L), d_eta[i] - shift) for i in range(rho.size))


def refined_available(quantities: GameQuantities) -> bool:
    return quantities.i_eta0 > quantities.i_eta_threshold


def ub_v2bar(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams,
             refined: bool = False) -> float:
    _check_L(L)
    _check_xi(quantities)
    rho_t = params.threshold_rho
    xi = quantities.xi
    H = entropy(belief)
    log_term = _v2_log_term(belief, L, quantities.d_eta)

    if refined:
        if refined_available(quantities):
            M = belief.num_hypotheses
            return (_ratio(H + _log_odds(rho_t) + xi, quantities.i_eta0)
                    + log_term
                    + _ratio((1.0 - rho_t) * math.log2(M) + (2.0 - rho_t) * xi + 4.0 + LOG2E,
                             quantities.i_eta_threshold)
                    + 1.0)
        logger.warning("Refined pi2 bound needs i_eta0 > i_eta_threshold; using the plain bound")

    return _ratio(H + _log_odds(rho_t) + xi + LOG2E, quantities.i_2) + log_term + 1.0


def ub_v2bar_pointwise(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams) -> float:
    """
    Per-hypothesis form: sum_i rho_i [(log L - [U_i]^+)^+ / D_eta_i + ([-U_i]^+ + xi + log e) / I_2] + 1,
    U_i = log(rho_i / (1 - rho_i)) - log(rho~ / (1 - rho~)). Never exceeds ub_v2bar.
    """
    _check_L(L)
    _check_xi(quantities)
    rho = belief.probs
    threshold = _log_odds(params.threshold_rho)
    log_l = math.log2(L)

    total = 0.0
    for i in range(rho.size):
        if rho[i] == 0:
            continue
        u = math.inf if rho[i] == 1 else _log_odds(rho[i]) - threshold
        total += rho[i] * (_ratio(_positive(log_l - _positive(u)), quantities.d_eta[i])
                           + _ratio(_positive(-u) + quantities.xi + LOG2E, quantities.i_2))
    return total + 1.0


def ub_v3_feasibility(quantities: GameQuantities, shrink: float, b: float):
    """Returns (feasible, c) with c = (1 + log e / b) 2^(-b) psi / (I_2 - psi)."""
    if not shrink < quantities.i_2:
        return False, math.inf
    c = (1.0 + LOG2E / b) * 2.0 ** (-b) * shrink / (quantities.i_2 - shrink)
    return c < 1.0, c


def ub_v3(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams, model: Model) -> float:
    _check_L(L)
    params = params.resolve(L, belief.num_hypotheses)
    b = params.b
    shrink = psi(model, b)
    feasible, c = ub_v3_feasibility(quantities, shrink, b)
    if not feasible:
        return math.inf
    gain = quantities.i_2 - shrink
    inner = (entropy(belief) + _log_odds(params.threshold_rho) + b + LOG2E) / gain
    inner += _v2_log_term(belief, L, quantities.d_eta, shift=shrink)
    return inner / (1.0 - c) + 1.0


@dataclass
class ReliabilityRegion:
    """Upper line E <= D_max_sup (1 - R / I_max_sup); achievable line E <= D2_inf (1 - R / I2_inf)."""
    limits: FamilyLimits

    def upper(self, rate) -> np.ndarray:
        rate = np.asarray(rate, dtype=float)
        if self.limits.i_max_sup <= 0:
            return np.zeros_like(rate)
        return np.clip(self.limits.d_max_sup * (1.0 - rate / self.limits.i_max_sup), 0.0, None)

    def achievable(self, rate) -> np.ndarray:
        rate = np.asarray(rate, dtype=float)
        if self.limits.i2_inf <= 0:
            return np.zeros_like(rate)
        return np.clip(self.limits.d2_inf * (1.0 - rate / self.limits.i2_inf), 0.0, None)

    def curves(self, num_points: int = 101) -> pd.DataFrame:
        rate = np.linspace(0.0, self.limits.i_max_sup, num_points)
        return pd.DataFrame({"R": rate, "E_upper": self.upper(rate), "E_achievable": self.achievable(rate)})


def reliability_region(quantities_family) -> ReliabilityRegion:
    return ReliabilityRegion(limits=family_limits(quantities_family))


def primal_lower(V_star_value: float, L: float, epsilon: float) -> float:
    """Lower bound on E[tau] for policies with error probability at most epsilon."""
    _check_L(L)
    if not 0 < epsilon < 1:
        raise PreconditionError(f"epsilon must be in (0, 1), got {epsilon}")
    return _positive((1.0 - epsilon * L) * (V_star_value - 1.0))


def submartingale_stopping_bound(B: float, U0: float, K1: float, K2: float, K3: float) -> float:
    """
    Bound on E[upsilon] for the first time a submartingale with drift at least K1
    (K2 once nonnegative) and increments bounded by K3 crosses B.
    """
    if not 0 < K1 <= K2 <= K3:
        raise PreconditionError(f"Need 0 < K1 <= K2 <= K3, got K1={K1}, K2={K2}, K3={K3}")
    if not B > _positive(U0):
        raise PreconditionError(f"Need B > [U0]^+, got B={B}, U0={U0}")
    correction = U0 * (1.0 / K2 - 1.0 / K1) if U0 < 0 else 0.0
    return (B - U0) / K2 + correction + (K3 + LOG2E) / K1


def binary_asymptotic_value(belief: Belief, L: float, model: Model) -> float:
    """
    rho_1 (log L - log(rho_1/rho_2)) / max_a D(q_1 || q_2) + rho_2 (log L - log(rho_2/rho_1)) / max_a D(q_2 || q_1),
    the growth of V* for two hypotheses.
    """
    _check_L(L)
    if model.num_hypotheses != 2:
        raise PreconditionError("The binary expansion needs exactly two hypotheses")
    rho = belief.probs
    if np.any(rho == 0):
        raise PreconditionError("The binary expansion needs a belief with full support")
    D = np.max(model.divergences, axis=0)
    log_l = math.log2(L)
    return (_ratio(rho[0] * (log_l - math.log2(rho[0] / rho[1])), D[0, 1])
            + _ratio(rho[1] * (log_l - math.log2(rho[1] / rho[0])), D[1, 0]))


LOWER_BOUNDS = ("lb_v1", "lb_chernoff", "lb_alpha_form", "lb_v2", "lb_uniform", "lb_v3")
UPPER_BOUNDS = ("ub_v1bar", "ub_v2bar", "ub_v2bar_refined", "ub_v2bar_pointwise", "ub_v3bar")


@dataclass
class BoundReport:
    lb_v1: float
    lb_chernoff: float
    lb_alpha_form: float
    lb_v2: float
    lb_uniform: float
    lb_v3: float
    ub_v1bar: float
    ub_v2bar: float
    ub_v2bar_refined: float
    ub_v2bar_pointwise: float
    ub_v3bar: float
    params: BoundParams
    notes: List[str] = field(default_factory=list)

    def values(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in LOWER_BOUNDS + UPPER_BOUNDS}

    def to_frame(self, L: float) -> pd.DataFrame:
        return pd.DataFrame([{"L": L, "bound": name, "value": value} for name, value in self.values().items()])


def evaluate_bounds(belief: Belief, L: float, quantities: GameQuantities, params: BoundParams,
                    model: Model) -> BoundReport:
    """
    Evaluates every bound at one belief. A lower bound whose precondition fails
    is reported as 0, an infeasible upper bound as infinity; both leave a note.
    """
    _check_L(L)
    M = belief.num_hypotheses
    resolved = params.resolve(L, M)
    notes = []

    def lower(name, compute: Callable[[], float]) -> float:
        try:
            return compute()
        except PreconditionError as e:
            notes.append(f"{name}: not applicable ({e})")
            return 0.0

    def upper(name, compute: Callable[[], float]) -> float:
        try:
            value = compute()
        except PreconditionError as e:
            notes.append(f"{name}: not applicable ({e})")
            return math.inf
        if math.isinf(value):
            notes.append(f"{name}: vacuous")
        return value

    values = {
        "lb_v1": lower("lb_v1", lambda: lb_v1(belief, L, quantities, resolved)),
        "lb_chernoff": lower("lb_chernoff", lambda: lb_chernoff(belief, L, quantities, resolved)),
        "lb_alpha_form": lower("lb_alpha_form", lambda: lb_alpha_form(belief, L, M, quantities.i_max)),
        "lb_v2": lower("lb_v2", lambda: lb_v2(belief, L, quantities, resolved)),
        "lb_uniform": lower("lb_uniform", lambda: lb_uniform_prior(
            M, L, family_limits([quantities]), resolved.K2_prime)),
        "lb_v3": lower("lb_v3", lambda: lb_v3(belief, L, quantities, resolved, model)),
        "ub_v1bar": upper("ub_v1bar", lambda: ub_v1bar(belief, L, quantities, resolved)),
        "ub_v2bar": upper("ub_v2bar", lambda: ub_v2bar(belief, L, quantities, resolved)),
        "ub_v2bar_refined": upper("ub_v2bar_refined", lambda: ub_v2bar(belief, L, quantities, resolved, refined=True)),
        "ub_v2bar_pointwise": upper("ub_v2bar_pointwise", lambda: ub_v2bar_pointwise(belief, L, quantities, resolved)),
        "ub_v3bar": upper("ub_v3bar", lambda: ub_v3(belief, L, quantities, resolved, model)),
    }
    if not refined_available(quantities):
        notes.append("ub_v2bar_refined: needs i_eta0 > i_eta_threshold, plain bound reported")
    shrink = psi(model, resolved.b)
    if not ub_v3_feasibility(quantities, shrink, resolved.b)[0]:
        notes.append(f"ub_v3bar: infeasible, psi(b={resolved.b:.4g})={shrink:.4g} against i_2={quantities.i_2:.4g}")

    return BoundReport(params=resolved, notes=notes, **values)
