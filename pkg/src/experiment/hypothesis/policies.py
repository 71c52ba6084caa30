"""
Decision rules mapping a belief to either an action distribution or a
retire-and-declare decision.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, TYPE_CHECKING

import numpy as np

from .errors import PreconditionError
from .games import ActionMixture, GameQuantities
from .model import Belief, Model, posterior_table

if TYPE_CHECKING:
    from .dp import ValueGrid


PI1 = "pi1"
PI2 = "pi2"
CHERNOFF = "chernoff"
GRID = "dp"
POLICY_IDS = (PI1, PI2, CHERNOFF, GRID)


@dataclass(frozen=True, eq=False)
class Decision:
    mixture: Optional[ActionMixture] = None
    hypothesis: Optional[int] = None

    def __post_init__(self):
        if (self.mixture is None) == (self.hypothesis is None):
            raise ValueError("A decision either samples a mixture or declares a hypothesis")

    @classmethod
    def sample(cls, mixture: ActionMixture) -> "Decision":
        return cls(mixture=mixture)

    @classmethod
    def declare(cls, hypothesis: int) -> "Decision":
        return cls(hypothesis=int(hypothesis))

    @property
    def is_declare(self) -> bool:
        return self.hypothesis is not None


@dataclass(frozen=True)
class PolicyConfig:
    L: float
    threshold_rho: float
    quantities: GameQuantities

    def __post_init__(self):
        if not self.L > 1:
            raise PreconditionError(f"L must be greater than 1, got {self.L}")
        if not 0.5 < self.threshold_rho < 1:
            raise PreconditionError(f"threshold_rho must be in (0.5, 1), got {self.threshold_rho}")

    @property
    def declare_level(self) -> float:
        return 1.0 - 1.0 / self.L


def _declared(probs: np.ndarray, level: float) -> Optional[int]:
    """Lowest index with rho_i >= level, if any."""
    hits = np.flatnonzero(probs >= level)
    return int(hits[0]) if hits.size else None


def _two_phase(probs: np.ndarray, config: PolicyConfig, phase1: ActionMixture,
               phase2: Sequence[ActionMixture]) -> Decision:
    level = config.declare_level
    hypothesis = _declared(probs, level)
    if hypothesis is not None:
        return Decision.declare(hypothesis)
    confident = np.flatnonzero(probs >= config.threshold_rho)
    if confident.size:
        return Decision.sample(phase2[int(confident[0])])
    return Decision.sample(phase1)


def pi1_decide(config: PolicyConfig, belief: Belief) -> Decision:
    """Declare at rho_i >= 1 - 1/L; sample mu_i while rho_i in [rho~, 1 - 1/L); mu_0 otherwise."""
    return _two_phase(belief.probs, config, config.quantities.mu0, config.quantities.mu)


def pi2_decide(config: PolicyConfig, belief: Belief) -> Decision:
    return _two_phase(belief.probs, config, config.quantities.eta0, config.quantities.eta)


def chernoff_decide(config: PolicyConfig, belief: Belief) -> Decision:
    """Samples mu_{i*} for the current most likely hypothesis i* (lowest index on ties)."""
    probs = belief.probs
    leader = int(np.argmax(probs))
    if probs[leader] >= config.declare_level:
        return Decision.declare(leader)
    return Decision.sample(config.quantities.mu[leader])


def _check_grid(value_grid: "ValueGrid", model: Model, L: float):
    if value_grid.M != model.num_hypotheses or value_grid.L != L:
        raise PreconditionError(
            f"Value grid was built for M={value_grid.M}, L={value_grid.L}; "
            f"got M={model.num_hypotheses}, L={L}")


def grid_policy_decide(value_grid: "ValueGrid", model: Model, L: float, belief: Belief) -> Decision:
    """
    Declares argmin_j (1 - rho_j) L when that cost is at most 1 + min_a (T^a V)(rho),
    V interpolated from the grid; otherwise samples the minimizing action (lowest index on ties).
    """
    _check_grid(value_grid, model, L)
    probs = belief.probs
    stop_cost = (1.0 - probs) * L
    guess = int(np.argmin(stop_cost))

    posteriors, marginals = posterior_table(model.kernels, probs)
    continuation = np.einsum("az,az->a", marginals, value_grid.interpolate_many(posteriors))
    action = int(np.argmin(continuation))
    if stop_cost[guess] <= 1.0 + continuation[action]:
        return Decision.declare(guess)
    return Decision.sample(ActionMixture.point_mass(model.num_actions, action))


class Policy(ABC):
    policy_id: str

    @abstractmethod
    def decide(self, belief: Belief) -> Decision:
        pass


class ThresholdPolicy(Policy):
    def __init__(self, policy_id: str, config: PolicyConfig):
        self.policy_id = policy_id
        self.config = config
        self._rule = pi1_decide if policy_id == PI1 else pi2_decide

    def decide(self, belief: Belief) -> Decision:
        return self._rule(self.config, belief)


class ChernoffPolicy(Policy):
    policy_id = CHERNOFF

    def __init__(self, config: PolicyConfig):
        self.config = config

    def decide(self, belief: Belief) -> Decision:
        return chernoff_decide(self.config, belief)


class GridPolicy(Policy):
    policy_id = GRID

    def __init__(self, value_grid: "ValueGrid", model: Model, L: float):
        _check_grid(value_grid, model, L)
        self.value_grid = value_grid
        self.model = model
        self.L = L

    def decide(self, belief: Belief) -> Decision:
        return grid_policy_decide(self.value_grid, self.model, self.L, belief)


def make_policy(policy_id: str, model: Model, config: PolicyConfig,
                value_grid: Optional["ValueGrid"] = None) -> Policy:
    """
    Cria a política pedida.

    Args:
        policy_id (str): Um de pi1, pi2, chernoff, dp
        model (Model): Modelo de observação
        config (PolicyConfig): L, limiar rho~ e quantidades dos jogos
        value_grid (ValueGrid, optional): Obrigatório para a política dp

    Returns:
        Policy: Objeto com `decide(belief)`
    """
    if policy_id in (PI1, PI2):
        return ThresholdPolicy(policy_id, config)
    if policy_id == CHERNOFF:
        return ChernoffPolicy(config)
    if policy_id == GRID:
        if value_grid is None:
            raise PreconditionError("The dp policy needs a value grid from value_iterate")
        return GridPolicy(value_grid, model, config.L)
    raise PreconditionError(f"Unknown policy '{policy_id}'. Expected one of: {', '.join(POLICY_IDS)}")
