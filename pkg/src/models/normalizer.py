from dataclasses import dataclass
import logging

import numpy as np

from utils.errors import ValidationError

logger = logging.getLogger('beam_qtl.normalizer')


@dataclass
class FeatureNormalizer:
    """Per-feature z-score in dB units, fitted once on labeled source data and then frozen"""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] == 0:
            raise ValidationError(f"cannot fit a normalizer on data of shape {features.shape}")
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        flat = std == 0
        if flat.any():
            logger.warning(f"{int(flat.sum())} constant features; using unit scale for them")
            std = np.where(flat, 1.0, std)
        return cls(mean, std)

    @classmethod
    def identity(cls, n_features):
        return cls(np.zeros(n_features), np.ones(n_features))

    @property
    def n_features(self):
        return self.mean.shape[0]

    def transform(self, features):
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.std

    def to_document(self):
        return {'mean': self.mean.tolist(), 'std': self.std.tolist()}

    @classmethod
    def from_document(cls, doc):
        return cls(np.asarray(doc['mean'], dtype=np.float64), np.asarray(doc['std'], dtype=np.float64))


def check_features(x, n_features):
    """Validate one sample (``(n_features,)``) or a batch (``(N, n_features)``) of finite features"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (n_features,) or x.ndim not in (1, 2):
        raise ValidationError(f"expected {n_features} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("features contain non-finite values")
    return x


def check_labels(labels, n_classes, n_samples=None):
    """Validate integer class labels in ``0..n_classes-1``, one per sample when ``n_samples`` is given"""
    labels = np.asarray(labels)
    if labels.ndim != 1 or (labels.size and not np.issubdtype(labels.dtype, np.integer)):
        raise ValidationError(f"labels must be a 1-D integer array, got {labels.dtype} shape {labels.shape}")
    if n_samples is not None and labels.size != n_samples:
        raise ValidationError(f"{labels.size} labels for {n_samples} samples")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValidationError(f"labels must lie in 0..{n_classes - 1}")
    return labels.astype(np.int64)
