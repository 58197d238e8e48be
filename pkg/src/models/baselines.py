"""kNN and Gaussian naive Bayes on the same frozen feature normalization as the neural models."""
from dataclasses import dataclass
import logging

import numpy as np

from config import Config
from models.normalizer import FeatureNormalizer, check_features, check_labels
from utils.errors import CheckpointError, ValidationError

logger = logging.getLogger('beam_qtl.baselines')

QUERY_CHUNK = 512


@dataclass
class KnnModel:
    features: np.ndarray  # normalized training features
    labels: np.ndarray
    k: int
    normalizer: FeatureNormalizer
    n_classes: int = Config.N_CLASSES

    kind = 'knn'

    def __post_init__(self):
        if self.features.shape[0] == 0:
            raise ValidationError("kNN needs at least one training sample")
        if not 1 <= self.k <= self.features.shape[0]:
            raise ValidationError(f"k={self.k} must lie in 1..{self.features.shape[0]} (training size)")

    @classmethod
    def fit(cls, features, labels, k=None, normalizer=None, n_classes=Config.N_CLASSES):
        features = check_features(np.atleast_2d(features), np.atleast_2d(features).shape[1])
        normalizer = normalizer or FeatureNormalizer.identity(features.shape[1])
        model = cls(normalizer.transform(features), check_labels(labels, n_classes, features.shape[0]),
                    k or Config.KNN_K, normalizer, n_classes)
        logger.debug(f"Fitted kNN on {features.shape[0]} samples, k={model.k}")
        return model

    @property
    def n_features(self):
        return self.features.shape[1]

    def parameter_counts(self):
        return {'quantum': 0, 'classical': 0}

    def scores(self, features):
        """Vote fraction per class among the k nearest training points (Euclidean)"""
        queries = self.normalizer.transform(check_features(np.atleast_2d(features), self.n_features))
        out = np.zeros((queries.shape[0], self.n_classes))
        train_sq = np.sum(self.features ** 2, axis=1)
        for start in range(0, queries.shape[0], QUERY_CHUNK):
            q = queries[start:start + QUERY_CHUNK]
            d2 = np.sum(q ** 2, axis=1)[:, None] - 2.0 * q @ self.features.T + train_sq[None, :]
            nearest = np.argsort(d2, axis=1, kind='stable')[:, :self.k]
            votes = self.labels[nearest]
            for row, v in enumerate(votes):
                out[start + row] = np.bincount(v, minlength=self.n_classes)[:self.n_classes]
        return out / self.k

    def to_document(self):
        return {
            'kind': self.kind, 'k': self.k, 'n_classes': self.n_classes,
            'features': self.features.tolist(), 'labels': self.labels.tolist(),
            'normalizer': self.normalizer.to_document(),
        }

    @classmethod
    def from_document(cls, doc):
        try:
            return cls(np.asarray(doc['features'], dtype=np.float64), np.asarray(doc['labels'], dtype=np.int64),
                       doc['k'], FeatureNormalizer.from_document(doc['normalizer']), doc['n_classes'])
        except KeyError as e:
            raise CheckpointError(f"kNN checkpoint is missing {e}")


def knn_predict(model: KnnModel, x) -> np.ndarray:
    return model.scores(x)[0]


@dataclass
class GnbModel:
    priors: np.ndarray     # (C,)
    means: np.ndarray      # (C, F) in normalized units
    variances: np.ndarray  # (C, F)
    normalizer: FeatureNormalizer

    kind = 'gnb'

    @property
    def n_features(self):
        return self.means.shape[1]

    @property
    def n_classes(self):
        return self.priors.shape[0]

    def parameter_counts(self):
        return {'quantum': 0, 'classical': 0}

    def log_joint(self, features):
        x = self.normalizer.transform(check_features(np.atleast_2d(features), self.n_features))
        diff = x[:, None, :] - self.means[None, :, :]
        log_density = -0.5 * (np.log(2.0 * np.pi * self.variances)[None] + diff ** 2 / self.variances[None])
        return np.log(self.priors)[None, :] + log_density.sum(axis=2)

    def scores(self, features):
        """Class posteriors, normalized in log space"""
        joint = self.log_joint(features)
        joint -= joint.max(axis=1, keepdims=True)
        post = np.exp(joint)
        return post / post.sum(axis=1, keepdims=True)

    def to_document(self):
        return {
            'kind': self.kind, 'priors': self.priors.tolist(), 'means': self.means.tolist(),
            'variances': self.variances.tolist(), 'normalizer': self.normalizer.to_document(),
        }

    @classmethod
    def from_document(cls, doc):
        try:
            return cls(*(np.asarray(doc[k], dtype=np.float64) for k in ('priors', 'means', 'variances')),
                       FeatureNormalizer.from_document(doc['normalizer']))
        except KeyError as e:
            raise CheckpointError(f"GNB checkpoint is missing {e}")


def gnb_fit(features, labels, normalizer=None, n_classes=Config.N_CLASSES) -> GnbModel:
    features = np.atleast_2d(features)
    features = check_features(features, features.shape[1])
    labels = check_labels(labels, n_classes, features.shape[0])
    normalizer = normalizer or FeatureNormalizer.identity(features.shape[1])
    x = normalizer.transform(features)

    counts = np.bincount(labels, minlength=n_classes)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValidationError(f"GNB needs at least one sample of every class; missing {missing.tolist()}")

    means = np.stack([x[labels == c].mean(axis=0) for c in range(n_classes)])
    variances = np.stack([x[labels == c].var(axis=0) for c in range(n_classes)])
    floor = Config.GNB_VAR_FLOOR * float(np.max(x.var(axis=0)))
    if floor <= 0:
        floor = Config.GNB_VAR_FLOOR
    variances = np.maximum(variances, floor)
    model = GnbModel(counts / counts.sum(), means, variances, normalizer)
    logger.debug(f"Fitted GNB on {labels.size} samples, variance floor {floor:.3g}")
    return model


def gnb_predict(model: GnbModel, x) -> np.ndarray:
    return model.scores(x)[0]
