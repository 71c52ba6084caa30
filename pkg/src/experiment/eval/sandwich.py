"""
Sandwich evaluation for one model: explicit lower bound, grid estimate of V*,
simulated policy cost and the pi2 upper bound, side by side per L.

    lb_alpha_form <= V_hat <= simulated cost <= ub_v2bar

V_hat is compared with the interpolation margin, the simulated cost with its
95% half-width.
"""
from dataclasses import dataclass
from typing import Optional

import pandas as pd
import math

from ..config.experiment_config import ExperimentConfig
from ..hypothesis.bounds import BoundParams, lb_alpha_form, ub_v2bar
from ..hypothesis.dp import MAX_HYPOTHESES, ValueGrid, interpolation_margin, value_iterate
from ..hypothesis.errors import GridSizeError
from ..hypothesis.games import GameQuantities, compute_quantities
from ..hypothesis.model import Belief, Model
from ..hypothesis.policies import GRID, PolicyConfig, make_policy
from ..hypothesis.sim import estimate
from ..utils import logger


SANDWICH_COLUMNS = ["L", "lb_alpha_form", "V_hat", "interpolation_margin", "sim_total_cost",
                    "cost_half_width", "pe_upper", "ub_v2bar", "lower_holds", "middle_holds",
                    "upper_holds", "ordering_holds"]


@dataclass
class SandwichResult:
    frame: pd.DataFrame
    holds: bool


def _grid_for(model: Model, L: float, config: ExperimentConfig) -> Optional[ValueGrid]:
    if model.num_hypotheses > MAX_HYPOTHESES:
        logger.info(f"M={model.num_hypotheses}: no grid oracle, V_hat left empty")
        return None
    try:
        return value_iterate(model, L, config.resolution, min(config.tol, 1e-9))
    except GridSizeError as e:
        logger.warning(f"Grid oracle skipped: {e}")
        return None


def sandwich_row(model: Model, L: float, config: ExperimentConfig, params: BoundParams,
                 quantities: GameQuantities) -> dict:
    """
    Avalia os quatro termos do sanduíche para um valor de L.

    Args:
        model (Model): Modelo de observação
        L (float): Penalidade por erro
        config (ExperimentConfig): Política, prior, ensaios, semente e resolução
        params (BoundParams): Parâmetros dos limitantes
        quantities (GameQuantities): Quantidades dos jogos

    Returns:
        dict: Linha da tabela com as colunas de SANDWICH_COLUMNS
    """
    M = model.num_hypotheses
    prior = Belief(config.prior_values(M))

    lower = lb_alpha_form(prior, L, M, quantities.i_max)
    upper = ub_v2bar(prior, L, quantities, params, refined=params.refined)

    grid = _grid_for(model, L, config)
    if grid is not None:
        v_hat = grid.interpolate(prior)
        margin = interpolation_margin(model, L, config.resolution, min(config.tol, 1e-9), coarse=grid).margin
    else:
        v_hat, margin = math.nan, math.nan

    if config.policy == GRID and grid is None:
        raise GridSizeError("The dp policy needs a grid oracle, which is unavailable for this model")
    policy = make_policy(config.policy, model,
                         PolicyConfig(L=L, threshold_rho=config.threshold_rho, quantities=quantities),
                         value_grid=grid)
    sim = estimate(model, policy, L, prior, config.n_trials, config.master_seed, config.step_cap)

    slack = sim.cost_half_width if math.isfinite(sim.cost_half_width) else math.inf
    if grid is not None:
        lower_holds = lower <= v_hat + margin
        middle_holds = v_hat - margin <= sim.total_cost + slack
    else:
        lower_holds = lower <= sim.total_cost + slack
        middle_holds = True
    upper_holds = sim.total_cost - slack <= upper

    return {
        "L": L,
        "lb_alpha_form": lower,
        "V_hat": v_hat,
        "interpolation_margin": margin,
        "sim_total_cost": sim.total_cost,
        "cost_half_width": sim.cost_half_width,
        "pe_upper": sim.pe_upper,
        "ub_v2bar": upper,
        "lower_holds": lower_holds,
        "middle_holds": middle_holds,
        "upper_holds": upper_holds,
        "ordering_holds": lower_holds and middle_holds and upper_holds,
    }


def run_sandwich(model: Model, config: ExperimentConfig, params: BoundParams) -> SandwichResult:
    logger.section("Sandwich")
    quantities = compute_quantities(model, config.threshold_rho, max(config.L_values), config.tol)

    rows = []
    for L in config.L_values:
        row = sandwich_row(model, L, config, params, quantities)
        rows.append(row)
        if row["ordering_holds"]:
            logger.success(f"L={L:g}: ordering holds")
        else:
            logger.error(f"L={L:g}: ordering violated "
                         f"(lower={row['lower_holds']}, middle={row['middle_holds']}, upper={row['upper_holds']})")

    frame = pd.DataFrame(rows, columns=SANDWICH_COLUMNS)
    return SandwichResult(frame=frame, holds=bool(frame["ordering_holds"].all()))
