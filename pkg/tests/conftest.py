import json

import numpy as np
import pytest

from src.experiment.hypothesis.games import compute_quantities
from src.experiment.hypothesis.model import Model, binary_symmetric_model
from src.experiment.hypothesis.model_io import model_to_dict
from src.experiment.hypothesis.nds import NdsSpec, build_model


def random_model(rng: np.random.Generator, M: int, K: int, Z: int) -> Model:
    """Strictly positive kernels drawn from a flat Dirichlet."""
    return Model.from_kernels(rng.dirichlet(np.ones(Z), size=(K, M)))


def nds_model(M: int, p: float = 0.25, family: str = "singletons") -> Model:
    return build_model(NdsSpec.size_independent(M, p, family))


@pytest.fixture(scope="session")
def bsc_model():
    return binary_symmetric_model(0.25)


@pytest.fixture(scope="session")
def bsc_quantities(bsc_model):
    return compute_quantities(bsc_model, threshold_rho=0.9, L=100.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def write_model(tmp_path):
    """Writes a model (or a raw document) to a JSON file and returns its path."""
    def _write(model_or_doc, name="model.json"):
        doc = model_to_dict(model_or_doc) if isinstance(model_or_doc, Model) else model_or_doc
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)
    return _write
