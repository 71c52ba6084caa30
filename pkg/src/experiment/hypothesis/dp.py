"""
Grid approximation of the optimal cost V* by value iteration on the belief simplex.

Lattice points are beliefs with coordinates k/N. Off-lattice posteriors are
evaluated by barycentric interpolation on the Freudenthal triangulation of the
cumulative coordinates x_d = N (rho_0 + ... + rho_d), d < M-1.
"""
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb
from typing import Callable, Optional, Union

import pandas as pd
import numpy as np

from .errors import GridSizeError, PreconditionError
from .model import Belief, Model, posterior_table
from ..utils import logger


MAX_HYPOTHESES = 4
MAX_LATTICE_POINTS = 250_000
MIN_RESOLUTION = 10
DEFAULT_SWEEPS = 100_000
DEFAULT_TOL = 1e-9
PROGRESS_EVERY = 1000


def stopping_cost(probs: np.ndarray, L: float) -> np.ndarray:
    """min_j (1 - rho_j) L, the cost of declaring the most likely hypothesis now."""
    return (1.0 - np.max(probs, axis=-1)) * L


class SimplexLattice:
    """Points {k/N} of the M-simplex with a dense index over cumulative coordinates."""

    def __init__(self, M: int, resolution: int):
        if M > MAX_HYPOTHESES:
            raise GridSizeError(f"The value grid supports M <= {MAX_HYPOTHESES}, got M={M}")
        size = comb(resolution + M - 1, M - 1)
        if size > MAX_LATTICE_POINTS:
            raise GridSizeError(
                f"Lattice with M={M}, N={resolution} has {size} points (limit {MAX_LATTICE_POINTS})")

        self.M = M
        self.resolution = resolution
        d = M - 1

        # Nondecreasing cumulative coordinates 0 <= c_1 <= ... <= c_d <= N enumerate the compositions of N.
        cumulative = np.array(list(combinations_with_replacement(range(resolution + 1), d)), dtype=np.int64)
        counts = np.diff(np.c_[np.zeros(len(cumulative), dtype=np.int64), cumulative,
                               np.full(len(cumulative), resolution)], axis=1)
        self.cumulative = cumulative
        self.points = counts / resolution

        self.dense_index = np.zeros((resolution + 1,) * d, dtype=np.int64)
        self.dense_index[tuple(cumulative.T)] = np.arange(len(cumulative))

    def __len__(self):
        return len(self.points)

    def locate(self, probs: np.ndarray):
        """
        Interpolation vertices and weights for beliefs of shape (..., M).

        Returns:
            (indices (..., M), weights (..., M)); vertices outside the lattice only get zero weight.
        """
        probs = np.asarray(probs, dtype=float)
        shape = probs.shape[:-1]
        flat = probs.reshape(-1, self.M)
        n, d, N = flat.shape[0], self.M - 1, self.resolution

        x = np.clip(N * np.cumsum(flat, axis=1)[:, :d], 0.0, N)
        base = np.clip(np.floor(x), 0, N - 1).astype(np.int64)
        frac = x - base
        order = np.argsort(-frac, axis=1, kind="stable")
        sorted_frac = np.take_along_axis(frac, order, axis=1)

        weights = np.empty((n, d + 1))
        weights[:, 0] = 1.0 - sorted_frac[:, 0]
        weights[:, 1:d] = sorted_frac[:, :d - 1] - sorted_frac[:, 1:]
        weights[:, d] = sorted_frac[:, d - 1]

        indices = np.empty((n, d + 1), dtype=np.int64)
        vertex = base.copy()
        rows = np.arange(n)
        indices[:, 0] = self.dense_index[tuple(vertex.T)]
        for k in range(1, d + 1):
            vertex[rows, order[:, k - 1]] += 1
            indices[:, k] = self.dense_index[tuple(vertex.T)]

        return indices.reshape(shape + (d + 1,)), weights.reshape(shape + (d + 1,))


@dataclass(eq=False)
class ValueGrid:
    M: int
    resolution: int
    L: float
    values: np.ndarray
    lattice: SimplexLattice = field(repr=False)
    convergence: float = 0.0
    sweeps: int = 0
    converged: bool = True

    @property
    def points(self) -> np.ndarray:
        return self.lattice.points

    @property
    def stopping_values(self) -> np.ndarray:
        return stopping_cost(self.points, self.L)

    def interpolate_many(self, probs: np.ndarray) -> np.ndarray:
        indices, weights = self.lattice.locate(probs)
        return np.sum(weights * self.values[indices], axis=-1)

    def interpolate(self, belief: Belief) -> float:
        return float(self.interpolate_many(belief.probs))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.points, columns=[f"rho_{i}" for i in range(self.M)])
        frame["value"] = self.values
        return frame


class _BellmanTables:
    """Posterior interpolation data for every (lattice point, action, symbol)."""

    def __init__(self, model: Model, lattice: SimplexLattice):
        posteriors, marginals = posterior_table(model.kernels, lattice.points)
        indices, weights = lattice.locate(posteriors)
        self.indices = indices
        self.coefficients = marginals[..., None] * weights

    def continuation(self, values: np.ndarray) -> np.ndarray:
        """min_a (T^a V)(rho) for every lattice point."""
        expected = np.sum(self.coefficients * values[self.indices], axis=(-2, -1))
        return expected.min(axis=1)


def _check_inputs(model: Model, L: float, resolution: int):
    if not L > 1:
        raise PreconditionError(f"L must be greater than 1, got {L}")
    if resolution < MIN_RESOLUTION:
        raise PreconditionError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    if model.num_hypotheses > MAX_HYPOTHESES:
        raise GridSizeError(f"The value grid supports M <= {MAX_HYPOTHESES}, got M={model.num_hypotheses}")


def value_iterate(model: Model, L: float, resolution: int, tol: float = DEFAULT_TOL,
                  max_sweeps: int = DEFAULT_SWEEPS) -> ValueGrid:
    """
    Value iteration V <- min{1 + min_a T^a V, min_j (1 - rho_j) L} from the stopping cost.
    The iterates decrease pointwise; the sweep stops once the sup-norm change is at most `tol`.
    """
    _check_inputs(model, L, resolution)
    lattice = SimplexLattice(model.num_hypotheses, resolution)
    tables = _BellmanTables(model, lattice)

    stop = stopping_cost(lattice.points, L)
    values = stop.copy()
    change = np.inf
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        updated = np.minimum(stop, 1.0 + tables.continuation(values))
        change = float(np.max(np.abs(updated - values)))
        values = updated
        if change <= tol:
            break
        if sweeps % PROGRESS_EVERY == 0:
            logger.info(f"Value iteration: sweep {sweeps}, change {change:.3g}")

    converged = change <= tol
    if converged:
        logger.info(f"Value iteration converged after {sweeps} sweeps ({len(lattice)} lattice points)")
    else:
        logger.warning(f"Value iteration stopped after {sweeps} sweeps with change {change:.3g}")
    return ValueGrid(M=model.num_hypotheses, resolution=resolution, L=L, values=values, lattice=lattice,
                     convergence=change, sweeps=sweeps, converged=converged)


@dataclass
class InterpolationMargin:
    """Discretization error estimate: max |V_N - V_2N| on the points shared by both lattices."""
    margin: float
    coarse: ValueGrid
    fine: ValueGrid


def interpolation_margin(model: Model, L: float, resolution: int, tol: float = DEFAULT_TOL,
                         coarse: Optional[ValueGrid] = None) -> InterpolationMargin:
    if coarse is None:
        coarse = value_iterate(model, L, resolution, tol)
    fine = value_iterate(model, L, 2 * resolution, tol)
    shared = fine.lattice.dense_index[tuple((2 * coarse.lattice.cumulative).T)]
    margin = float(np.max(np.abs(coarse.values - fine.values[shared])))
    logger.info(f"Interpolation margin at N={resolution}: {margin:.4g}")
    return InterpolationMargin(margin=margin, coarse=coarse, fine=fine)


@dataclass
class CertificateReport:
    """
    Lower-bound certificate check: V(rho) <= min{beta + min_a T^a V(rho), beta min_j (1 - rho_j) L}
    at every lattice point. Positive violation means the inequality fails there.
    """
    max_violation: float
    violating_points: np.ndarray
    slack: np.ndarray
    holds: bool


def check_lower_certificate(model: Model, L: float, beta: float,
                             candidate: Union[np.ndarray, ValueGrid, Callable[[Belief], float]],
                             resolution: int, tol: float = 1e-9) -> CertificateReport:
    """
    `candidate` is either lattice values (array or ValueGrid, interpolated off the lattice)
    or a function evaluated exactly at every posterior.
    """
    if not beta > 0:
        raise PreconditionError(f"beta must be positive, got {beta}")
    _check_inputs(model, L, resolution)
    lattice = SimplexLattice(model.num_hypotheses, resolution)
    posteriors, marginals = posterior_table(model.kernels, lattice.points)

    if callable(candidate) and not isinstance(candidate, ValueGrid):
        values = np.array([candidate(Belief(p)) for p in lattice.points])
        posterior_values = np.zeros(marginals.shape)
        for index in zip(*np.nonzero(marginals > 0)):
            posterior_values[index] = candidate(Belief(posteriors[index]))
    else:
        values = np.asarray(candidate.values if isinstance(candidate, ValueGrid) else candidate, dtype=float)
        if values.shape != (len(lattice),):
            raise PreconditionError(
                f"Candidate has {values.size} values but the lattice has {len(lattice)} points")
        indices, weights = lattice.locate(posteriors)
        posterior_values = np.sum(weights * values[indices], axis=-1)

    continuation = np.sum(marginals * posterior_values, axis=-1).min(axis=1)
    bound = np.minimum(beta + continuation, beta * stopping_cost(lattice.points, L))
    violation = values - bound
    max_violation = float(violation.max())
    return CertificateReport(max_violation=max_violation, violating_points=lattice.points[violation > tol],
                        slack=-violation, holds=max_violation <= tol)
