"""One JSON document per trained model, shared by every model kind.

Floats are written with ``repr`` precision by the json module, so a load
reproduces the saved parameters bit for bit.
"""
import json
import logging
from pathlib import Path

from config import Config
from models.baselines import GnbModel, KnnModel
from models.neural import DnnModel
from quantum.classifier import DressedQnnModel
from utils.errors import CheckpointError

logger = logging.getLogger('beam_qtl.checkpoint')

MODEL_KINDS = {
    'qnn': DressedQnnModel,
    'dnn': DnnModel,
    'knn': KnnModel,
    'gnb': GnbModel,
}


def model_to_document(model):
    doc = {'format_version': Config.CHECKPOINT_FORMAT_VERSION}
    doc.update(model.to_document())
    doc['parameter_counts'] = model.parameter_counts()
    return doc


def model_from_document(doc):
    version = doc.get('format_version')
    if version != Config.CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r} "
            f"(expected {Config.CHECKPOINT_FORMAT_VERSION})"
        )
    kind = doc.get('kind')
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    return MODEL_KINDS[kind].from_document(doc)


def save_checkpoint(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(model_to_document(model), f)
    logger.info(f"Saved {model.kind} checkpoint to {path}")
    return path


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with open(path, encoding='utf-8') as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {e}")
    model = model_from_document(doc)
    logger.debug(f"Loaded {model.kind} checkpoint from {path}")
    return model
