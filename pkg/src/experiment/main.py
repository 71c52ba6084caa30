from .config.cli_config import (
    UsageError,
    get_bound_params_from_args,
    get_experiment_config_from_args,
    setup_cli_parser
)
from .config.experiment_config import ExperimentConfig
from .eval.sandwich import run_sandwich
from .hypothesis.bounds import evaluate_bounds, reliability_region
from .hypothesis.dp import value_iterate
from .hypothesis.errors import GridSizeError, ModelStructureError, ModelValidationError, PreconditionError
from .hypothesis.games import compute_quantities, order2_condition
from .hypothesis.model import Belief, Model, validate
from .hypothesis.model_io import canonical_json, load_model, model_hash, save_model
from .hypothesis.nds import NdsSpec, build_model, closed_forms
from .hypothesis.policies import GRID, PolicyConfig, make_policy
from .hypothesis.sim import estimate, rate_sweep, rng_identity
from .utils import logger, set_log_level, write_csv, write_key_value_row

from typing import Dict, List, Optional

import pandas as pd
import argparse
import sys


EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2


def _require_model(config: ExperimentConfig, strict: bool = True) -> Model:
    if not config.model_path:
        raise PreconditionError("--model is required for this subcommand")
    model = load_model(config.model_path, strict=strict)
    logger.info(f"Modelo: {config.model_path} (M={model.num_hypotheses}, K={model.num_actions}, "
                f"|Z|={model.alphabet_size})")
    return model


def _metadata(config: ExperimentConfig, model: Optional[Model], **extra) -> Dict[str, object]:
    metadata = {
        "seed": config.master_seed,
        "model_hash": model_hash(model) if model is not None else "none",
        "policy": config.policy,
        "L": config.L_values,
        "rng": rng_identity(),
    }
    metadata.update(extra)
    return metadata


def _nds_sizes(args: argparse.Namespace) -> List[int]:
    if not args.nds_M:
        raise PreconditionError("--nds-M is required to build a noisy-search model")
    try:
        return [int(v) for v in args.nds_M.split(",") if v.strip()]
    except ValueError:
        raise PreconditionError(f"--nds-M must be an integer or a comma list of integers, got '{args.nds_M}'")


def cmd_validate(args, config: ExperimentConfig) -> int:
    logger.section("Validação do modelo")
    model = _require_model(config, strict=False)
    report = validate(model)
    lines = report.lines(model)
    for line in lines:
        logger.info(line)

    frame = pd.DataFrame({"finding": lines})
    write_csv(frame, _metadata(config, model, valid=report.is_valid), config.output_path)
    if not report.is_valid:
        logger.error(f"Modelo inválido: {len(report.negative_entries)} entrada(s) negativa(s), "
                     f"{len(report.row_sum_violations)} linha(s) fora da soma 1")
        return EXIT_VALIDATION
    logger.success("Modelo válido")
    return EXIT_OK


def cmd_solve_game(args, config: ExperimentConfig) -> int:
    logger.section("Jogos de informação")
    model = _require_model(config)
    quantities = compute_quantities(model, config.threshold_rho, max(config.L_values), config.tol)
    row = quantities.as_row()
    check = order2_condition(model, quantities)
    row["pi2_order2_slack"] = check.slack
    row["pi2_order2"] = check.holds
    write_key_value_row(row, _metadata(config, model), config.output_path)
    return EXIT_OK


def cmd_bounds(args, config: ExperimentConfig) -> int:
    logger.section("Limitantes")
    model = _require_model(config)
    quantities = compute_quantities(model, config.threshold_rho, max(config.L_values), config.tol)
    params = get_bound_params_from_args(args, config.threshold_rho)
    prior = Belief(config.prior_values(model.num_hypotheses))

    frames = []
    for L in config.L_values:
        report = evaluate_bounds(prior, L, quantities, params, model)
        for note in report.notes:
            logger.warning(f"L={L:g}: {note}")
        frames.append(report.to_frame(L))

    write_csv(pd.concat(frames, ignore_index=True), _metadata(config, model), config.output_path)
    return EXIT_OK


def cmd_simulate(args, config: ExperimentConfig) -> int:
    logger.section("Simulação")
    model = _require_model(config)
    quantities = compute_quantities(model, config.threshold_rho, max(config.L_values), config.tol)
    prior = Belief(config.prior_values(model.num_hypotheses))

    rows = []
    for L in config.L_values:
        grid = value_iterate(model, L, config.resolution) if config.policy == GRID else None
        policy = make_policy(config.policy, model,
                             PolicyConfig(L=L, threshold_rho=config.threshold_rho, quantities=quantities),
                             value_grid=grid)
        result = estimate(model, policy, L, prior, config.n_trials, config.master_seed, config.step_cap)
        rows.append({"policy": config.policy, **result.as_row()})

    write_csv(pd.DataFrame(rows), _metadata(config, model), config.output_path)
    return EXIT_OK


def cmd_dp_solve(args, config: ExperimentConfig) -> int:
    logger.section("Iteração de valor")
    model = _require_model(config)

    frames = []
    for L in config.L_values:
        grid = value_iterate(model, L, config.resolution)
        frame = grid.to_frame()
        frame.insert(0, "L", L)
        frames.append(frame)

    metadata = _metadata(config, model, resolution=config.resolution)
    write_csv(pd.concat(frames, ignore_index=True), metadata, config.output_path)
    return EXIT_OK


def _sweep_models(args, config: ExperimentConfig) -> Dict[int, Model]:
    if config.model_paths:
        family = {}
        for path in config.model_paths:
            model = load_model(path)
            if model.num_hypotheses in family:
                raise PreconditionError(f"Two models in --models have M={model.num_hypotheses}")
            family[model.num_hypotheses] = model
        return family
    return {M: build_model(NdsSpec.size_independent(M, args.nds_p, args.family)) for M in _nds_sizes(args)}


def cmd_rate_sweep(args, config: ExperimentConfig) -> int:
    logger.section("Taxa e confiabilidade")
    family = _sweep_models(args, config)
    quantities_family = {M: compute_quantities(model, config.threshold_rho, max(config.L_values), config.tol)
                         for M, model in family.items()}
    region = reliability_region(quantities_family)

    frames = []
    for L in config.L_values:
        frame = rate_sweep(family, config.policy, L, config.n_trials, config.master_seed,
                           config.threshold_rho, config.tol, config.step_cap, quantities_family)
        frame["E_upper"] = region.upper(frame["R_hat"])
        frame["E_achievable"] = region.achievable(frame["R_hat"])
        frames.append(frame)

    hashes = [model_hash(family[M]) for M in sorted(family)]
    metadata = _metadata(config, None, model_hash=hashes)
    write_csv(pd.concat(frames, ignore_index=True), metadata, config.output_path)
    return EXIT_OK


def cmd_nds(args, config: ExperimentConfig) -> int:
    logger.section("Busca ruidosa")
    sizes = _nds_sizes(args)
    if len(sizes) != 1:
        raise PreconditionError("nds writes one model file; pass a single --nds-M")
    spec = NdsSpec.size_independent(sizes[0], args.nds_p, args.family)
    model = build_model(spec)
    forms = closed_forms(spec)
    logger.info(f"d_eta_closed={forms.d_eta_closed:.6g} i2_lower={forms.i2_lower:.6g} "
                f"i_max_upper={forms.i_max_upper:.6g} ({model.num_actions} ações)")

    if config.output_path:
        save_model(model, config.output_path)
    else:
        sys.stdout.write(canonical_json(model) + "\n")
    return EXIT_OK


def cmd_sandwich(args, config: ExperimentConfig) -> int:
    model = _require_model(config)
    params = get_bound_params_from_args(args, config.threshold_rho)
    result = run_sandwich(model, config, params)
    metadata = _metadata(config, model, resolution=config.resolution)
    write_csv(result.frame, metadata, config.output_path)
    return EXIT_OK if result.holds else EXIT_VALIDATION


COMMANDS = {
    "validate": cmd_validate,
    "solve-game": cmd_solve_game,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "dp-solve": cmd_dp_solve,
    "rate-sweep": cmd_rate_sweep,
    "nds": cmd_nds,
    "sandwich": cmd_sandwich,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Executa um subcomando e devolve o código de saída.

    Args:
        argv (list, optional): Argumentos da linha de comando; sys.argv[1:] quando None

    Returns:
        int: 0 em caso de sucesso, 1 para falha de validação, 2 para erro de uso

    Exceções fora da hierarquia do pacote não são capturadas: um erro interno
    sai com o traceback em vez de se passar por modelo inválido.
    """
    parser = setup_cli_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        return e.status

    try:
        config = get_experiment_config_from_args(args)
        set_log_level(config.log_level)
        return COMMANDS[args.command](args, config)
    except (PreconditionError, GridSizeError) as e:
        logger.error(f"Erro de uso: {str(e)}")
        return EXIT_USAGE
    except (FileNotFoundError, ModelStructureError, ModelValidationError) as e:
        logger.error(f"Modelo rejeitado: {str(e)}")
        return EXIT_VALIDATION


def main():
    sys.exit(run())


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        logger.error("Processamento interrompido pelo usuário")
        sys.exit(130)
