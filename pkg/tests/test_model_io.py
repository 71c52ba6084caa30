import json

import numpy as np
import pytest

from src.experiment.hypothesis.errors import ModelStructureError, ModelValidationError
from src.experiment.hypothesis.model_io import (
    canonical_json,
    load_model,
    model_from_dict,
    model_hash,
    save_model
)


BSC_DOC = {
    "M": 2,
    "actions": ["observe"],
    "alphabet": ["0", "1"],
    "kernels": [[[0.75, 0.25], [0.25, 0.75]]],
}


class TestLoadModel:
    def test_load(self, write_model):
        model = load_model(write_model(BSC_DOC))
        assert model.num_hypotheses == 2
        assert model.actions == ("observe",)
        assert model.kernels.shape == (1, 2, 2)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ModelStructureError):
            load_model(path)

    def test_missing_fields(self):
        with pytest.raises(ModelStructureError, match="alphabet"):
            model_from_dict({"M": 2, "actions": ["a"], "kernels": [[[1.0, 0.0], [0.0, 1.0]]]})

    def test_m_mismatch(self):
        doc = dict(BSC_DOC, M=3)
        with pytest.raises(ModelStructureError):
            model_from_dict(doc)


class TestNormalization:
    def test_tiny_offsets_are_renormalized(self):
        doc = dict(BSC_DOC, kernels=[[[0.75 + 5e-10, 0.25], [0.25, 0.75]]])
        model = model_from_dict(doc)
        assert model.kernels[0, 0].sum() == pytest.approx(1.0, abs=1e-15)

    def test_strict_rejects_large_offsets(self):
        doc = dict(BSC_DOC, kernels=[[[0.75 + 1e-6, 0.25], [0.25, 0.75]]])
        with pytest.raises(ModelValidationError, match="action=0 hypothesis=0"):
            model_from_dict(doc)

    def test_strict_rejects_negative_entries(self):
        doc = dict(BSC_DOC, kernels=[[[1.1, -0.1], [0.25, 0.75]]])
        with pytest.raises(ModelValidationError, match="symbol=1"):
            model_from_dict(doc)

    def test_lenient_load_keeps_bad_rows(self):
        doc = dict(BSC_DOC, kernels=[[[1.1, -0.1], [0.25, 0.75]]])
        model = model_from_dict(doc, strict=False)
        assert model.kernels[0, 0, 1] == -0.1


class TestSaveAndHash:
    def test_save_then_load_preserves_hash(self, bsc_model, tmp_path):
        path = save_model(bsc_model, tmp_path / "out" / "bsc.json")
        assert model_hash(load_model(path)) == model_hash(bsc_model)

    def test_hash_ignores_formatting(self, tmp_path):
        compact = tmp_path / "compact.json"
        pretty = tmp_path / "pretty.json"
        compact.write_text(json.dumps(BSC_DOC), encoding="utf-8")
        pretty.write_text(json.dumps(BSC_DOC, indent=4), encoding="utf-8")
        assert model_hash(load_model(compact)) == model_hash(load_model(pretty))

    def test_hash_changes_with_kernels(self):
        other = dict(BSC_DOC, kernels=[[[0.7, 0.3], [0.25, 0.75]]])
        assert model_hash(model_from_dict(BSC_DOC)) != model_hash(model_from_dict(other))

    def test_canonical_json_is_sorted(self, bsc_model):
        text = canonical_json(bsc_model)
        assert list(json.loads(text)) == sorted(json.loads(text))
        assert " " not in text

    def test_save_does_not_alter_kernels(self, bsc_model, tmp_path):
        before = np.array(bsc_model.kernels)
        save_model(bsc_model, tmp_path / "bsc.json")
        assert np.array_equal(before, bsc_model.kernels)
