"""Source-domain pretraining and few-shot target-domain fine-tuning.

The same mini-batch AdamW loop drives both stages; fine-tuning differs only in
its freeze mask (dressing layers of the QNN, first/last layers of the DNN) and
in starting from fresh optimizer moments.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import FrozenSet, List, Optional
import copy
import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from analysis.evaluator import accuracy, evaluate, mean_std
from config import Config
from data_collection.dataset import Dataset, Domain
from data_collection.splits import split_labeled
from models.baselines import GnbModel, KnnModel, gnb_fit
from models.neural import AdamWState, DnnModel, adamw_step
from models.normalizer import FeatureNormalizer
from quantum.classifier import DressedQnnModel
from utils.errors import ConfigurationError, ValidationError
from utils import rng

logger = logging.getLogger('beam_qtl.trainer')


class ModelKind(Enum):
    DNN = 'dnn'
    QNN = 'qnn'
    KNN = 'knn'
    GNB = 'gnb'

    @property
    def is_baseline(self):
        return self in (ModelKind.KNN, ModelKind.GNB)


class FreezePolicy(Enum):
    IO_LAYERS = 'io_layers'  # QNN: input/output linear layers; DNN: first/last layers
    NONE = 'none'


@dataclass(frozen=True)
class TrainConfig:
    model_kind: ModelKind = ModelKind.QNN
    batch_size: int = Config.BATCH_SIZE
    epochs: int = Config.EPOCHS
    lr: float = Config.LEARNING_RATE
    weight_decay: float = Config.WEIGHT_DECAY
    seed: int = 0
    n_qubits: int = Config.N_QUBITS
    n_layers: int = Config.N_LAYERS
    knn_k: int = Config.KNN_K
    workers: int = Config.WORKERS
    eval_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'model_kind', ModelKind(self.model_kind))
        for name in ('batch_size', 'n_qubits', 'n_layers', 'knn_k', 'workers', 'eval_every'):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr < 0 or self.weight_decay < 0:
            raise ConfigurationError("lr and weight_decay must be non-negative")


@dataclass(frozen=True)
class TransferConfig:
    n_samples: Optional[int] = None
    fraction: Optional[float] = Config.TARGET_LABELED_FRACTION  # used when n_samples is None
    epochs: int = Config.FINETUNE_EPOCHS
    freeze: FreezePolicy = FreezePolicy.IO_LAYERS
    frozen_names: Optional[FrozenSet[str]] = None  # overrides the policy when given
    batch_size: int = Config.BATCH_SIZE
    lr: float = Config.LEARNING_RATE
    weight_decay: float = Config.WEIGHT_DECAY
    seed: int = 0
    resample: bool = True
    workers: int = Config.WORKERS

    def __post_init__(self):
        object.__setattr__(self, 'freeze', FreezePolicy(self.freeze))
        if self.n_samples is None and self.fraction is None:
            raise ConfigurationError("transfer needs n_samples or fraction")
        if self.n_samples is not None and self.n_samples < 1:
            raise ConfigurationError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.n_samples is None and not 0.0 < self.fraction <= 1.0:
            raise ConfigurationError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.epochs < 0 or self.batch_size < 1 or self.workers < 1:
            raise ConfigurationError("epochs must be >= 0, batch_size and workers >= 1")
        if self.lr < 0 or self.weight_decay < 0:
            raise ConfigurationError("lr and weight_decay must be non-negative")

    def split_size(self):
        return {'count': self.n_samples} if self.n_samples is not None else {'fraction': self.fraction}


@dataclass
class EpochRecord:
    epoch: int
    loss: Optional[float]
    train_accuracy: float
    eval_accuracy: Optional[float]
    steps: int


@dataclass
class TrainResult:
    model: object
    trace: List[EpochRecord] = field(default_factory=list)
    steps: int = 0
    optimizer: Optional[AdamWState] = None

    def trace_frame(self):
        return pd.DataFrame([vars(r) for r in self.trace],
                            columns=['epoch', 'loss', 'train_accuracy', 'eval_accuracy', 'steps'])


def build_model(config: TrainConfig, normalizer: FeatureNormalizer):
    if config.model_kind is ModelKind.QNN:
        return DressedQnnModel.create(config.n_qubits, config.n_layers, normalizer, seed=config.seed)
    if config.model_kind is ModelKind.DNN:
        return DnnModel.create(normalizer, seed=config.seed)
    raise ConfigurationError(f"{config.model_kind.value} is fitted, not built; use train_model")


class Trainer:
    """Mini-batch AdamW loop over one labeled subset"""

    def __init__(self, batch_size, epochs, lr, weight_decay, seed, workers=1, eval_every=1,
                 stage='pretrain', shuffle_key=()):
        logger.debug(f"Initializing Trainer ({stage})")
        self.batch_size = batch_size
        self.epochs = epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.seed = seed
        self.workers = workers
        self.eval_every = eval_every
        self.stage = stage
        self.shuffle_key = tuple(shuffle_key)

    def epoch_order(self, epoch, n):
        return rng.stream(self.seed, 'shuffle', *self.shuffle_key, epoch).permutation(n)

    def run(self, model, labeled: Dataset, frozen=None, eval_set: Optional[Dataset] = None) -> TrainResult:
        if len(labeled) == 0:
            raise ValidationError(f"{self.stage} needs a non-empty labeled subset")
        params = model.parameters()
        # fresh moments every stage
        state = AdamWState.create(params, lr=self.lr, weight_decay=self.weight_decay)
        frozen = {name: True for name in (frozen or ())}
        features, labels = labeled.features, labeled.labels
        n = len(labeled)

        result = TrainResult(model=model, optimizer=state)
        logger.info(f"Starting {self.stage}: {model.kind}, {n} samples, {self.epochs} epochs, "
                    f"batch {self.batch_size}, frozen {sorted(frozen) or 'none'}")
        epochs = tqdm(range(self.epochs), desc=f"{self.stage} {model.kind}", disable=not Config.PROGRESS,
                      leave=False)
        for epoch in epochs:
            order = self.epoch_order(epoch, n)
            batch_losses = []
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                loss, grads = model.loss_and_grad(features[idx], labels[idx], workers=self.workers)
                adamw_step(params, grads, state, frozen=frozen)
                batch_losses.append(loss)
                result.steps += 1

            evaluate_now = eval_set is not None and len(eval_set) and (
                (epoch + 1) % self.eval_every == 0 or epoch + 1 == self.epochs)
            record = EpochRecord(
                epoch=epoch + 1,
                loss=float(np.mean(batch_losses)),
                train_accuracy=accuracy(model, labeled),
                eval_accuracy=accuracy(model, eval_set) if evaluate_now else None,
                steps=result.steps,
            )
            result.trace.append(record)
            epochs.set_postfix(loss=f"{record.loss:.4f}", acc=f"{record.train_accuracy:.3f}")
            logger.debug(f"{self.stage} epoch {record.epoch}: loss {record.loss:.5f}, "
                         f"train acc {record.train_accuracy:.4f}, eval acc {record.eval_accuracy}")

        if result.trace:
            last = result.trace[-1]
            logger.info(f"Finished {self.stage}: {result.steps} steps, final loss {last.loss:.4f}, "
                        f"train acc {last.train_accuracy:.4f}")
        return result


def fit_baseline(config: TrainConfig, labeled: Dataset, normalizer: FeatureNormalizer):
    if config.model_kind is ModelKind.KNN:
        return KnnModel.fit(labeled.features, labeled.labels, k=config.knn_k, normalizer=normalizer)
    if config.model_kind is ModelKind.GNB:
        return gnb_fit(labeled.features, labeled.labels, normalizer=normalizer)
    raise ConfigurationError(f"{config.model_kind.value} is not a baseline")


def pretrain(model, labeled: Dataset, config: TrainConfig, eval_set: Optional[Dataset] = None) -> TrainResult:
    """Train a copy of ``model`` on labeled source data; baselines are refitted instead"""
    if len(labeled) == 0:
        raise ValidationError("pretraining needs a non-empty labeled subset")
    if isinstance(model, (KnnModel, GnbModel)):
        fitted = fit_baseline(config, labeled, model.normalizer)
        record = EpochRecord(1, None, accuracy(fitted, labeled),
                             accuracy(fitted, eval_set) if eval_set is not None and len(eval_set) else None, 0)
        return TrainResult(model=fitted, trace=[record])

    trainer = Trainer(config.batch_size, config.epochs, config.lr, config.weight_decay, config.seed,
                      workers=config.workers, eval_every=config.eval_every, stage='pretrain')
    return trainer.run(copy.deepcopy(model), labeled, eval_set=eval_set)


def train_model(labeled: Dataset, config: TrainConfig, eval_set: Optional[Dataset] = None) -> TrainResult:
    """Fit the frozen normalizer on ``labeled``, build a fresh model and pretrain it"""
    if len(labeled) == 0:
        raise ValidationError("training needs a non-empty labeled subset")
    normalizer = FeatureNormalizer.fit(labeled.features)
    if config.model_kind.is_baseline:
        model = fit_baseline(config, labeled, normalizer)
        return pretrain(model, labeled, config, eval_set)
    return pretrain(build_model(config, normalizer), labeled, config, eval_set)


def model_factory(config: TrainConfig):
    """Callable (labeled subset, seed) -> trained model, for sample-size sweeps"""
    def factory(labeled, seed):
        return train_model(labeled, replace(config, seed=seed)).model
    return factory


def resolve_frozen(model, tconfig: TransferConfig):
    if isinstance(model, (KnnModel, GnbModel)):
        raise ConfigurationError(f"transfer fine-tuning is not defined for {model.kind} baselines")
    names = set(model.parameters())
    if tconfig.frozen_names is not None:
        frozen = set(tconfig.frozen_names)
    elif tconfig.freeze is FreezePolicy.IO_LAYERS:
        frozen = model.frozen_for_transfer()
    else:
        frozen = set()
    unknown = frozen - names
    if unknown:
        raise ConfigurationError(f"unknown parameters in freeze set: {sorted(unknown)}")
    if frozen == names:
        raise ConfigurationError("freeze set covers every parameter; nothing would be fine-tuned")
    return frozen


def transfer_finetune(model, fewshot: Dataset, tconfig: TransferConfig,
                      eval_set: Optional[Dataset] = None, shuffle_key=()) -> TrainResult:
    """Fine-tune a copy of a pretrained model on few-shot target labels with frozen layers"""
    frozen = resolve_frozen(model, tconfig)
    if len(fewshot) == 0:
        raise ValidationError("transfer fine-tuning needs a non-empty few-shot subset")
    trainer = Trainer(tconfig.batch_size, tconfig.epochs, tconfig.lr, tconfig.weight_decay, tconfig.seed,
                      workers=tconfig.workers, stage='transfer', shuffle_key=shuffle_key)
    return trainer.run(copy.deepcopy(model), fewshot, frozen=frozen, eval_set=eval_set)


@dataclass(frozen=True)
class TransferExperiment:
    pretrained: object
    dataset: Dataset
    tconfig: TransferConfig
    vary_seeds: bool = True  # False forces every repeat onto the same split and shuffle


@dataclass
class RepeatedResult:
    runs: pd.DataFrame
    mean: dict
    std: dict
    models: list = field(repr=False, default_factory=list)
    reports: list = field(repr=False, default_factory=list)  # EvalReport per repeat


REPEAT_METRICS = ('pre_accuracy', 'accuracy', 'macro_auc', 'micro_auc')


def run_repeated(spec: TransferExperiment, n_repeats: int = Config.N_REPEATS) -> RepeatedResult:
    """Fine-tune the same pretrained model several times and aggregate target-domain metrics.

    With ``tconfig.resample`` each repeat draws its own few-shot subset; otherwise the
    subset is fixed and only the mini-batch shuffling changes between repeats.
    """
    if n_repeats < 1:
        raise ValidationError(f"n_repeats must be >= 1, got {n_repeats}")
    tconfig = spec.tconfig
    rows, models, reports = [], [], []
    for r in range(n_repeats):
        key = (r,) if spec.vary_seeds else (0,)
        split_key = key if tconfig.resample else (0,)
        split = split_labeled(spec.dataset, Domain.TARGET, seed=tconfig.seed, key=split_key, **tconfig.split_size())
        result = transfer_finetune(spec.pretrained, split.labeled, tconfig, shuffle_key=key)
        report = evaluate(result.model, split.evaluation)
        rows.append({
            'repeat': r,
            'n_transfer': len(split.labeled),
            'pre_accuracy': accuracy(spec.pretrained, split.evaluation),
            'accuracy': report.accuracy,
            'macro_auc': report.macro_auc,
            'micro_auc': report.micro_auc,
        })
        models.append(result.model)
        reports.append(report)
        logger.info(f"Transfer repeat {r + 1}/{n_repeats}: accuracy {rows[-1]['pre_accuracy']:.4f} -> "
                    f"{report.accuracy:.4f} with {len(split.labeled)} target labels")

    runs = pd.DataFrame(rows)
    stats = {m: mean_std(runs[m]) for m in REPEAT_METRICS}
    return RepeatedResult(
        runs=runs,
        mean={m: s[0] for m, s in stats.items()},
        std={m: s[1] for m, s in stats.items()},
        models=models,
        reports=reports,
    )


def transfer_curve(pretrained, dataset: Dataset, grid, tconfig: TransferConfig,
                   n_repeats: int = Config.N_REPEATS) -> pd.DataFrame:
    """Target accuracy (mean/std over repeats) against the number of transfer samples"""
    available = len(dataset.domain(Domain.TARGET))
    rows = []
    for n in grid:
        if not 1 <= n < available:
            raise ValidationError(f"transfer grid value {n} must lie in 1..{available - 1}")
        repeated = run_repeated(
            TransferExperiment(pretrained, dataset, replace(tconfig, n_samples=int(n))), n_repeats)
        rows.append({
            'n_transfer': int(n),
            'mean_acc': repeated.mean['accuracy'],
            'std_acc': repeated.std['accuracy'],
            'pre_mean_acc': repeated.mean['pre_accuracy'],
        })
    return pd.DataFrame(rows, columns=['n_transfer', 'mean_acc', 'std_acc', 'pre_mean_acc'])
