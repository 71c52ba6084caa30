from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

from scipy.special import rel_entr
from scipy.stats import entropy as scipy_entropy

import numpy as np
import math

from .errors import ModelStructureError, PreconditionError


LOG2E = math.log2(math.e)
LN2 = math.log(2.0)

ROW_SUM_TOL = 1e-12
BELIEF_TOL = 1e-12
TINY_MARGINAL = 1e-300


@dataclass(frozen=True, eq=False)
class Model:
    """
    Finite-alphabet observation model: `kernels[a, i, z]` is the probability of
    observing symbol z under action a when hypothesis i is true.

    Construction only checks the shape of the tensor. Row sums and signs are
    checked by `validate`, which reports problems instead of raising.
    """
    num_hypotheses: int
    actions: Tuple[str, ...]
    alphabet: Tuple[str, ...]
    kernels: np.ndarray

    def __post_init__(self):
        try:
            kernels = np.array(self.kernels, dtype=float)
        except (TypeError, ValueError) as e:
            raise ModelStructureError(f"Kernel tensor is not numeric: {e}")

        if kernels.ndim != 3:
            raise ModelStructureError(
                f"Kernel tensor must have 3 dimensions (actions, hypotheses, symbols), got {kernels.ndim}")

        num_actions, num_hypotheses, alphabet_size = kernels.shape
        if num_hypotheses != self.num_hypotheses:
            raise ModelStructureError(
                f"Kernel tensor has {num_hypotheses} rows per action but M={self.num_hypotheses}")
        if num_hypotheses < 2:
            raise ModelStructureError("A model needs at least two hypotheses")
        if num_actions < 1 or num_actions != len(self.actions):
            raise ModelStructureError(
                f"Kernel tensor has {num_actions} action matrices but {len(self.actions)} action labels")
        if alphabet_size < 2 or alphabet_size != len(self.alphabet):
            raise ModelStructureError(
                f"Kernel tensor has {alphabet_size} columns but the alphabet has {len(self.alphabet)} symbols")
        if not np.all(np.isfinite(kernels)):
            raise ModelStructureError("Kernel tensor contains NaN or infinite entries")

        kernels.setflags(write=False)
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "actions", tuple(str(a) for a in self.actions))
        object.__setattr__(self, "alphabet", tuple(str(z) for z in self.alphabet))

    @classmethod
    def from_kernels(cls, kernels, actions: Optional[Sequence[str]] = None,
                     alphabet: Optional[Sequence[str]] = None) -> "Model":
        kernels = np.asarray(kernels, dtype=float)
        if kernels.ndim != 3:
            raise ModelStructureError(
                f"Kernel tensor must have 3 dimensions (actions, hypotheses, symbols), got {kernels.ndim}")
        num_actions, num_hypotheses, alphabet_size = kernels.shape
        if actions is None:
            actions = [f"a{k}" for k in range(num_actions)]
        if alphabet is None:
            alphabet = [str(z) for z in range(alphabet_size)]
        return cls(num_hypotheses=num_hypotheses, actions=tuple(actions),
                   alphabet=tuple(alphabet), kernels=kernels)

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    @property
    def alphabet_size(self) -> int:
        return len(self.alphabet)

    @cached_property
    def divergences(self) -> np.ndarray:
        """Pairwise KL divergences D[a, i, j] = D(q_i^a || q_j^a) in bits (inf on support violation)."""
        qi = self.kernels[:, :, None, :]
        qj = self.kernels[:, None, :, :]
        return rel_entr(qi, qj).sum(axis=-1) / LN2

    @cached_property
    def log_ratios(self) -> np.ndarray:
        """log2(q_i^a(z) / q_j^a(z)) where q_i^a(z) > 0, -inf elsewhere; shape (K, M, M, Z)."""
        qi = self.kernels[:, :, None, :]
        qj = self.kernels[:, None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.log2(qi) - np.log2(qj)
        return np.where(qi > 0, ratios, -np.inf)

    @cached_property
    def xi(self) -> float:
        return float(np.max(self.log_ratios))

    @cached_property
    def d_max(self) -> float:
        return float(np.max(self.divergences))


@dataclass(frozen=True, eq=False)
class Belief:
    """A point on the probability simplex over the hypotheses."""
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 1:
            raise PreconditionError("A belief must be a non-empty vector")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise PreconditionError(f"Belief entries must be finite and nonnegative: {probs}")
        total = probs.sum()
        if abs(total - 1.0) > BELIEF_TOL:
            raise PreconditionError(f"Belief entries must sum to 1, got {total}")
        probs = probs / total if total != 1.0 else probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, num_hypotheses: int) -> "Belief":
        return cls(np.full(num_hypotheses, 1.0 / num_hypotheses))

    @classmethod
    def point_mass(cls, num_hypotheses: int, hypothesis: int) -> "Belief":
        probs = np.zeros(num_hypotheses)
        probs[hypothesis] = 1.0
        return cls(probs)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "Belief":
        return cls(np.asarray(values, dtype=float))

    @property
    def num_hypotheses(self) -> int:
        return self.probs.size

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True)
class BeliefUpdateResult:
    posterior: Belief
    marginal: float


@dataclass(frozen=True)
class RowSumViolation:
    action: int
    hypothesis: int
    total: float


@dataclass(frozen=True)
class NegativeEntry:
    action: int
    hypothesis: int
    symbol: int
    value: float


@dataclass
class ValidationReport:
    assumption1: bool
    assumption2: bool
    xi: float
    distinguishability: np.ndarray
    row_sum_violations: List[RowSumViolation] = field(default_factory=list)
    negative_entries: List[NegativeEntry] = field(default_factory=list)
    indistinguishable_pairs: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.row_sum_violations and not self.negative_entries

    @property
    def xi_label(self) -> str:
        return "infinite" if math.isinf(self.xi) else f"{self.xi:.12g}"

    def lines(self, model: Optional[Model] = None) -> List[str]:
        """One line per finding, naming the exact action/hypothesis/symbol."""
        def action_name(a):
            return model.actions[a] if model is not None else str(a)

        lines = []
        for entry in self.negative_entries:
            lines.append(f"negative entry: action={action_name(entry.action)} hypothesis={entry.hypothesis} "
                         f"symbol={entry.symbol} value={entry.value!r}")
        for violation in self.row_sum_violations:
            lines.append(f"row sum violation: action={action_name(violation.action)} "
                         f"hypothesis={violation.hypothesis} sum={violation.total!r}")
        for i, j in self.indistinguishable_pairs:
            lines.append(f"indistinguishable pair: ({i}, {j}) under every action")
        lines.append(f"assumption1={self.assumption1}")
        lines.append(f"assumption2={self.assumption2}")
        lines.append(f"xi={self.xi_label}")
        return lines


def validate(model: Model) -> ValidationReport:
    kernels = model.kernels

    negative_entries = [
        NegativeEntry(int(a), int(i), int(z), float(kernels[a, i, z]))
        for a, i, z in zip(*np.nonzero(kernels < 0))
    ]

    sums = kernels.sum(axis=2)
    row_sum_violations = [
        RowSumViolation(int(a), int(i), float(sums[a, i]))
        for a, i in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL))
    ]

    with np.errstate(invalid="ignore"):
        distinguishability = np.max(model.divergences, axis=0)
    M = model.num_hypotheses
    indistinguishable_pairs = [
        (i, j) for i in range(M) for j in range(M)
        if i != j and not distinguishability[i, j] > 0
    ]

    supports = kernels > 0
    assumption2 = bool(np.all(supports == supports[:, :1, :]))

    return ValidationReport(
        assumption1=not indistinguishable_pairs,
        assumption2=assumption2,
        xi=model.xi if assumption2 and not negative_entries else math.inf,
        distinguishability=distinguishability,
        row_sum_violations=row_sum_violations,
        negative_entries=negative_entries,
        indistinguishable_pairs=indistinguishable_pairs,
    )


def kl(model: Model, i: int, j: int, a: int) -> float:
    """D(q_i^a || q_j^a) in bits; +inf when q_i^a puts mass outside the support of q_j^a."""
    M = model.num_hypotheses
    if not (0 <= i < M and 0 <= j < M and 0 <= a < model.num_actions):
        raise IndexError(f"Index out of range: i={i}, j={j}, a={a}")
    return float(model.divergences[a, i, j])


def entropy(belief: Belief) -> float:
    return float(scipy_entropy(belief.probs, base=2))


def binary_entropy(p: float) -> float:
    return float(scipy_entropy([p, 1.0 - p], base=2))


def posterior_probs(kernels: np.ndarray, probs: np.ndarray, action: int, symbol: int):
    """Array-level Bayes update used by the simulator; returns (posterior, marginal)."""
    joint = probs * kernels[action, :, symbol]
    marginal = float(joint.sum())
    if marginal <= 0.0:
        return probs, 0.0
    return joint / marginal, marginal


def posterior_table(kernels: np.ndarray, probs: np.ndarray):
    """
    Posteriors for every action and symbol at once.

    Args:
        kernels: array (K, M, Z)
        probs: array (..., M) of beliefs

    Returns:
        (posteriors (..., K, Z, M), marginals (..., K, Z)); zero-marginal entries keep the prior.
    """
    probs = np.asarray(probs, dtype=float)
    joint = probs[..., None, None, :] * np.moveaxis(kernels, 1, 2)
    marginals = joint.sum(axis=-1)
    prior = np.broadcast_to(probs[..., None, None, :], joint.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        posteriors = np.where(marginals[..., None] > 0, joint / marginals[..., None], prior)
    return posteriors, marginals


def bayes_update(model: Model, belief: Belief, a: int, z: int) -> BeliefUpdateResult:
    posterior, marginal = posterior_probs(model.kernels, belief.probs, a, z)
    if marginal == 0.0:
        return BeliefUpdateResult(posterior=belief, marginal=0.0)
    return BeliefUpdateResult(posterior=Belief(posterior), marginal=marginal)


def markov_operator(model: Model, a: int, g: Callable[[Belief], float], belief: Belief) -> float:
    """(T^a g)(rho) = sum_z g(Phi^a(rho, z)) q_rho^a(z)."""
    posteriors, marginals = posterior_table(model.kernels[a:a + 1], belief.probs)
    total = 0.0
    for z in range(model.alphabet_size):
        marginal = marginals[0, z]
        if marginal > 0:
            total += marginal * g(Belief(posteriors[0, z]))
    return float(total)


def mutual_information(model: Model, a: int, belief: Belief) -> float:
    """I(rho; q_rho^a) = sum_i rho_i D(q_i^a || q_rho^a), in bits."""
    probs = belief.probs
    rows = model.kernels[a]
    mixture = probs @ rows
    active = probs > 0
    divergences = rel_entr(rows[active], mixture[None, :]).sum(axis=-1) / LN2
    return max(float(probs[active] @ divergences), 0.0)


def psi(model: Model, b: float) -> float:
    """
    max over (i, j, a) of sum_z q_i^a(z) r(z) 1{r(z) > b}, r = log2(q_i^a / q_j^a).
    Support violations give +inf.
    """
    if b < 0:
        raise PreconditionError(f"psi needs b >= 0, got {b}")
    ratios = model.log_ratios
    qi = model.kernels[:, :, None, :]
    with np.errstate(invalid="ignore"):
        terms = np.where(ratios > b, qi * ratios, 0.0)
    return float(np.max(terms.sum(axis=-1)))


def binary_symmetric_model(p: float) -> Model:
    """M=2, one action, rows [1-p, p] and [p, 1-p]."""
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"Crossover probability must be in [0, 1], got {p}")
    kernels = np.array([[[1.0 - p, p], [p, 1.0 - p]]])
    return Model.from_kernels(kernels, actions=["observe"], alphabet=["0", "1"])


def divergence_tensor(model: Model) -> np.ndarray:
    return model.divergences


def d_max(model: Model) -> float:
    return model.d_max


def xi(model: Model) -> float:
    return model.xi
