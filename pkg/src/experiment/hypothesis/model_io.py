"""
Model files are JSON documents:

    {
      "M": 2,
      "actions": ["observe"],
      "alphabet": ["0", "1"],
      "kernels": [[[0.75, 0.25], [0.25, 0.75]]]
    }

`kernels` holds one M x |Z| matrix per action. Rows off by at most 1e-9 are
renormalized on load; worse rows are rejected when loading strictly and kept
as-is otherwise, so `validate` can report them.
"""
from pathlib import Path
from typing import Union

import numpy as np
import hashlib
import json

from .errors import ModelStructureError, ModelValidationError
from .model import Model
from ..utils import json_serialize, logger


LOAD_NORMALIZE_TOL = 1e-9

REQUIRED_FIELDS = ("M", "actions", "alphabet", "kernels")


def model_from_dict(data: dict, strict: bool = True) -> Model:
    missing = [key for key in REQUIRED_FIELDS if key not in data]
    if missing:
        raise ModelStructureError(f"Model document is missing fields: {', '.join(missing)}")

    try:
        num_hypotheses = int(data["M"])
        kernels = np.array(data["kernels"], dtype=float)
    except (TypeError, ValueError) as e:
        raise ModelStructureError(f"Model document has a malformed field: {e}")

    if kernels.ndim != 3:
        raise ModelStructureError(
            f"'kernels' must be a list of M x |Z| matrices, got an array with {kernels.ndim} dimensions")

    sums = kernels.sum(axis=2)
    offsets = np.abs(sums - 1.0)
    negative = kernels < 0

    if strict:
        if np.any(negative):
            a, i, z = (int(v) for v in np.argwhere(negative)[0])
            raise ModelValidationError(
                f"Negative probability at action={a} hypothesis={i} symbol={z}: {kernels[a, i, z]!r}")
        if np.any(offsets > LOAD_NORMALIZE_TOL):
            a, i = (int(v) for v in np.argwhere(offsets > LOAD_NORMALIZE_TOL)[0])
            raise ModelValidationError(
                f"Row action={a} hypothesis={i} sums to {sums[a, i]!r}, off by more than {LOAD_NORMALIZE_TOL}")

    fixable = (offsets > 0) & (offsets <= LOAD_NORMALIZE_TOL) & ~np.any(negative, axis=2)
    if np.any(fixable):
        kernels[fixable] = kernels[fixable] / sums[fixable][:, None]
        logger.info(f"Renormalized {int(fixable.sum())} kernel row(s) within {LOAD_NORMALIZE_TOL}")

    return Model(
        num_hypotheses=num_hypotheses,
        actions=tuple(data["actions"]),
        alphabet=tuple(data["alphabet"]),
        kernels=kernels,
    )


def model_to_dict(model: Model) -> dict:
    return {
        "M": model.num_hypotheses,
        "actions": list(model.actions),
        "alphabet": list(model.alphabet),
        "kernels": json_serialize(model.kernels),
    }


def load_model(path: Union[str, Path], strict: bool = True) -> Model:
    """
    Carrega um modelo a partir de um arquivo JSON.

    Args:
        path (str): Caminho do arquivo do modelo
        strict (bool): Rejeita linhas que não somam 1 (tolerância 1e-9) e entradas negativas

    Returns:
        Model: Modelo carregado
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Model file not found: {path}")

    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelStructureError(f"Model file {path} is not valid JSON: {e}")

    if not isinstance(data, dict):
        raise ModelStructureError(f"Model file {path} must contain a JSON object")

    return model_from_dict(data, strict=strict)


def save_model(model: Model, path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(model_to_dict(model), f, indent=2)
        f.write("\n")
    logger.success(f"Modelo salvo em: {path}")
    return str(path)


def canonical_json(model: Model) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))


def model_hash(model: Model) -> str:
    """SHA-256 of the canonical JSON form; independent of file formatting."""
    return hashlib.sha256(canonical_json(model).encode("utf-8")).hexdigest()
