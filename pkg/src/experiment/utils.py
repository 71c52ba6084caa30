from typing import Mapping, Optional

import pandas as pd
import numpy as np
import colorlog
import logging
import math
import sys
import os


TOOL_NAME = "hypothesis-lab"
TOOL_VERSION = "0.3.0"
VACUOUS = "vacuous"


SUCCESS = 25  # Entre INFO (20) e WARNING (30)
LOG_LEVELS = ("DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR")

LOG_COLORS = {
    'DEBUG': 'cyan',
    'INFO': 'blue',
    'SUCCESS': 'green',
    'WARNING': 'yellow',
    'ERROR': 'red',
    'CRITICAL': 'red,bg_white',
}


def _success(self, message, *args, **kwargs):
    self.log(SUCCESS, message, *args, **kwargs)


def _section(self, title):
    separator = "=" * 50
    self.info(f"\n{separator}")
    self.info(f"{title}")
    self.info(f"{separator}")


def setup_logger(level: str = "INFO") -> logging.Logger:
    """
    Configura o logger colorido da ferramenta.

    Os logs vão para stderr; stdout fica reservado às tabelas CSV e ao JSON dos modelos.

    Args:
        level (str): Nível inicial, um de LOG_LEVELS
    """
    logging.addLevelName(SUCCESS, 'SUCCESS')
    logging.Logger.success = _success
    logging.Logger.section = _section

    logger = logging.getLogger('hypothesis_lab')
    logger.propagate = False
    logger.handlers.clear()

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(colorlog.ColoredFormatter("%(log_color)s%(message)s%(reset)s", log_colors=LOG_COLORS))
    logger.addHandler(handler)

    # HiGHS reports through scipy; only its warnings are of interest here.
    logging.getLogger('scipy').setLevel(logging.WARNING)

    set_log_level(level, logger)
    return logger


def set_log_level(level: str, target: Optional[logging.Logger] = None):
    """Ajusta o nível do logger e de seus handlers; aceita os nomes de LOG_LEVELS em qualquer caixa."""
    name = str(level).upper()
    if name not in LOG_LEVELS:
        raise ValueError(f"Unknown log level '{level}'. Expected one of: {', '.join(LOG_LEVELS)}")
    target = target or logger
    numeric = logging.getLevelName(name)
    target.setLevel(numeric)
    for handler in target.handlers:
        handler.setLevel(numeric)


logger = setup_logger()


def format_value(value):
    """
    Formats a cell for CSV output. Infinite bounds are reported as vacuous,
    vectors are joined with ';'.
    """
    if isinstance(value, (float, np.floating)):
        if math.isinf(value):
            return VACUOUS
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return ";".join(str(format_value(v)) for v in value.ravel())
    if isinstance(value, (list, tuple)):
        return ";".join(str(format_value(v)) for v in value)
    return value


def json_serialize(obj):
    """
    Converte valores NumPy para tipos Python nativos para permitir serialização JSON.
    """
    if isinstance(obj, (np.integer, np.int64)):
        return int(obj)
    elif isinstance(obj, (np.floating, np.float64)):
        return float(obj)
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    elif isinstance(obj, pd.DataFrame):
        return obj.to_dict('records')
    elif isinstance(obj, pd.Series):
        return obj.to_dict()
    return obj


def metadata_block(metadata: Mapping[str, object]) -> str:
    """
    Builds the '# key=value' comment block written at the top of every CSV.
    The tool version always comes first; no timestamps, so reruns are byte-identical.
    """
    lines = [f"# tool={TOOL_NAME}", f"# tool_version={TOOL_VERSION}"]
    for key, value in metadata.items():
        lines.append(f"# {key}={format_value(value)}")
    return "\n".join(lines) + "\n"


def write_csv(df: pd.DataFrame, metadata: Mapping[str, object], output_path: Optional[str] = None):
    """
    Escreve um DataFrame em CSV precedido pelo bloco de metadados.

    Args:
        df (pandas.DataFrame): Tabela de resultados
        metadata (dict): Metadados suficientes para reproduzir a execução
        output_path (str, optional): Caminho do arquivo; stdout quando None

    Returns:
        str: Caminho do arquivo escrito, ou None para stdout
    """
    formatted = df.apply(lambda column: column.map(format_value)) if not df.empty else df
    text = metadata_block(metadata) + formatted.to_csv(index=False, lineterminator="\n")

    if output_path is None:
        sys.stdout.write(text)
        return None

    directory = os.path.dirname(os.path.abspath(output_path))
    os.makedirs(directory, exist_ok=True)
    with open(output_path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)

    logger.success(f"Resultados salvos em: {output_path}")
    return output_path


def write_key_value_row(row: Mapping[str, object], metadata: Mapping[str, object], output_path: Optional[str] = None):
    """Writes a single flat key=value CSV row after the metadata block."""
    cells = []
    for key, value in row.items():
        cell = f"{key}={format_value(value)}"
        if any(ch in cell for ch in ',"\n'):
            cell = '"' + cell.replace('"', '""') + '"'
        cells.append(cell)
    text = metadata_block(metadata) + ",".join(cells) + "\n"

    if output_path is None:
        sys.stdout.write(text)
        return None

    os.makedirs(os.path.dirname(os.path.abspath(output_path)), exist_ok=True)
    with open(output_path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    logger.success(f"Resultados salvos em: {output_path}")
    return output_path
