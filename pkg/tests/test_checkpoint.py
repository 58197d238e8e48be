import json

import numpy as np
import pytest

from models.baselines import KnnModel, gnb_fit
from models.checkpoint import load_checkpoint, model_from_document, model_to_document, save_checkpoint
from models.neural import DnnModel
from models.normalizer import FeatureNormalizer
from quantum.classifier import DressedQnnModel
from utils.errors import CheckpointError


def normalizer():
    gen = np.random.default_rng(0)
    return FeatureNormalizer(gen.normal(size=36), gen.uniform(0.5, 2.0, size=36))


def models():
    gen = np.random.default_rng(1)
    X = gen.normal(size=(16, 36))
    y = np.arange(16) % 8
    return [
        DressedQnnModel.create(4, 2, normalizer(), seed=1),
        DnnModel.create(normalizer(), seed=1),
        KnnModel.fit(X, y, k=3, normalizer=normalizer()),
        gnb_fit(X, y, normalizer=normalizer()),
    ]


@pytest.mark.parametrize("model", models(), ids=lambda m: m.kind)
def test_checkpoint_reload_reproduces_scores_exactly(model, tmp_path):
    path = save_checkpoint(model, tmp_path / f"{model.kind}.json")
    loaded = load_checkpoint(path)
    assert loaded.kind == model.kind
    X = np.random.default_rng(2).normal(size=(5, 36))
    np.testing.assert_array_equal(loaded.scores(X), model.scores(X))


def test_document_records_version_kind_and_counts():
    doc = model_to_document(DressedQnnModel.create(10, 1))
    assert doc['format_version'] == 1
    assert doc['kind'] == 'qnn'
    assert doc['parameter_counts'] == {'quantum': 18, 'classical': 458}
    assert doc['n_qubits'] == 10 and doc['n_layers'] == 1


def test_wrong_version_rejected():
    doc = model_to_document(DnnModel.create())
    doc['format_version'] = 99
    with pytest.raises(CheckpointError):
        model_from_document(doc)


def test_unknown_kind_rejected():
    doc = model_to_document(DnnModel.create())
    doc['kind'] = 'svm'
    with pytest.raises(CheckpointError):
        model_from_document(doc)


def test_missing_field_rejected():
    doc = model_to_document(DressedQnnModel.create(3, 1))
    del doc['parameters']['theta']
    with pytest.raises(CheckpointError):
        model_from_document(doc)


def test_missing_or_corrupt_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)


def test_checkpoint_is_plain_json(tmp_path):
    path = save_checkpoint(DnnModel.create(), tmp_path / "nested" / "dnn.json")
    doc = json.loads(path.read_text())
    assert set(doc['parameters']) >= {'input.weight', 'block3.bias', 'output.weight'}


@pytest.mark.parametrize("name, cut", [('block2.weight', 1), ('output.bias', 3), ('input.weight', 35)])
def test_dnn_layer_shape_mismatch_rejected(name, cut):
    doc = model_to_document(DnnModel.create())
    doc['parameters'][name] = doc['parameters'][name][:cut]
    with pytest.raises(CheckpointError):
        model_from_document(doc)


def test_qnn_theta_shape_mismatch_rejected():
    doc = model_to_document(DressedQnnModel.create(3, 1))
    doc['parameters']['theta'] = doc['parameters']['theta'] + [0.1]
    with pytest.raises(CheckpointError):
        model_from_document(doc)


def test_dnn_normalizer_width_must_match_input_layer():
    doc = model_to_document(DnnModel.create())
    doc['normalizer'] = {'mean': [0.0] * 35, 'std': [1.0] * 35}
    with pytest.raises(CheckpointError):
        model_from_document(doc)
