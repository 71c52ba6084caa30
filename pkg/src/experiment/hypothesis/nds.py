"""
Noisy dynamic search: one target hidden among M locations, inspected through
subsets whose answer ("target present") is flipped with a probability that
depends only on the size of the inspected subset.
"""
from dataclasses import dataclass
from itertools import combinations
from typing import List, Sequence, Tuple

import numpy as np
import math

from .errors import GridSizeError, PreconditionError
from .model import Model, binary_entropy


SINGLETONS = "singletons"
ALL_SUBSETS = "all_subsets"
DYADIC_INTERVALS = "dyadic_intervals"
ACTION_FAMILIES = (SINGLETONS, ALL_SUBSETS, DYADIC_INTERVALS)

ALL_SUBSETS_MAX_M = 12


@dataclass(frozen=True)
class NdsSpec:
    """
    `noise_profile[n - 1]` is the flip probability p_n of an inspection of size n,
    for n = 1..M-1.
    """
    M: int
    noise_profile: Tuple[float, ...]
    action_family: str = SINGLETONS

    def __post_init__(self):
        object.__setattr__(self, "noise_profile", tuple(float(p) for p in self.noise_profile))
        if self.M < 2:
            raise PreconditionError(f"Noisy search needs M >= 2 locations, got {self.M}")
        if self.action_family not in ACTION_FAMILIES:
            raise PreconditionError(
                f"Unknown action family '{self.action_family}'. Expected one of: {', '.join(ACTION_FAMILIES)}")
        if len(self.noise_profile) != self.M - 1:
            raise PreconditionError(
                f"Noise profile needs one entry per inspection size 1..{self.M - 1}, got {len(self.noise_profile)}")

        profile = np.asarray(self.noise_profile)
        if profile[0] <= 0:
            raise PreconditionError(f"p_1 must be positive, got {profile[0]}")
        if np.any(np.diff(profile) < 0):
            raise PreconditionError(f"Noise profile must be nondecreasing in the inspection size: {self.noise_profile}")
        if profile[-1] >= 0.5:
            raise PreconditionError(f"Noise probabilities must stay below 0.5, got {profile[-1]}")

    @classmethod
    def size_independent(cls, M: int, p: float, family: str = SINGLETONS) -> "NdsSpec":
        return cls(M=M, noise_profile=(p,) * (M - 1), action_family=family)

    def noise(self, size: int) -> float:
        return self.noise_profile[size - 1]


def dyadic_intervals(M: int) -> List[Tuple[int, ...]]:
    """Nonempty proper intervals produced by recursively halving [0, M)."""
    intervals = []

    def split(lo, hi):
        if hi - lo < 2:
            return
        mid = (lo + hi) // 2
        for a, b in ((lo, mid), (mid, hi)):
            intervals.append(tuple(range(a, b)))
            split(a, b)

    split(0, M)
    return intervals


def bisection_family(M: int) -> List[Tuple[int, ...]]:
    return dyadic_intervals(M)


def action_sets(M: int, family: str) -> List[Tuple[int, ...]]:
    if family == SINGLETONS:
        return [(i,) for i in range(M)]
    if family == ALL_SUBSETS:
        if M > ALL_SUBSETS_MAX_M:
            raise GridSizeError(
                f"all_subsets is limited to M <= {ALL_SUBSETS_MAX_M} ({2 ** M - 2} actions requested)")
        return [subset for size in range(1, M) for subset in combinations(range(M), size)]
    if family == DYADIC_INTERVALS:
        return dyadic_intervals(M)
    raise PreconditionError(f"Unknown action family '{family}'")


def action_label(subset: Sequence[int]) -> str:
    return "inspect[" + ",".join(str(i) for i in subset) + "]"


def build_model(spec: NdsSpec) -> Model:
    """Binary outcome: symbol 1 means 'target detected in the inspected subset'."""
    subsets = action_sets(spec.M, spec.action_family)
    kernels = np.empty((len(subsets), spec.M, 2))
    for k, subset in enumerate(subsets):
        p = spec.noise(len(subset))
        kernels[k, :, :] = [1.0 - p, p]
        kernels[k, list(subset), :] = [p, 1.0 - p]
    return Model.from_kernels(kernels, actions=[action_label(s) for s in subsets], alphabet=["0", "1"])


@dataclass(frozen=True)
class NdsClosedForms:
    d_eta_closed: float
    i2_lower: float
    i_max_upper: float


def closed_forms(spec: NdsSpec) -> NdsClosedForms:
    p1 = spec.noise(1)
    sizes = {len(subset) for subset in action_sets(spec.M, spec.action_family)}
    worst_entropy = max(binary_entropy(spec.noise(n)) for n in sizes)
    return NdsClosedForms(
        d_eta_closed=(1.0 - 2.0 * p1) * math.log2((1.0 - p1) / p1),
        i2_lower=1.0 - worst_entropy,
        i_max_upper=1.0 - binary_entropy(p1),
    )
