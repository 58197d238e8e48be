from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Tuple
import hashlib
import logging

import numpy as np
import pandas as pd

from config import Config
from utils.errors import ValidationError

logger = logging.getLogger('beam_qtl.dataset')


class Domain(Enum):
    SOURCE = 'source'
    TARGET = 'target'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"domain must be 'source' or 'target', got {value!r}")


@dataclass(frozen=True)
class BeamSnrSample:
    features: Tuple[float, ...]  # beam SNR per beampattern, dB
    label: int
    domain: Domain
    session: int

    def __post_init__(self):
        if len(self.features) != Config.N_FEATURES:
            raise ValidationError(f"expected {Config.N_FEATURES} beam SNRs, got {len(self.features)}")
        if not all(np.isfinite(self.features)):
            raise ValidationError("beam SNRs must be finite")
        if not 0 <= self.label < Config.N_CLASSES:
            raise ValidationError(f"pose label {self.label} out of range 0..{Config.N_CLASSES - 1}")


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype)
    array.flags.writeable = False
    return array


class Dataset:
    """Immutable column store of beam SNR samples; subsets share nothing mutable"""

    def __init__(self, features, labels, domains, sessions):
        self.features = _frozen(features, np.float64).reshape(-1, Config.N_FEATURES)
        self.labels = _frozen(labels, np.int64)
        self.domains = _frozen([Domain.parse(d).value for d in domains], '<U6')
        self.sessions = _frozen(sessions, np.int64)
        n = self.features.shape[0]
        if not (self.labels.shape == self.domains.shape == self.sessions.shape == (n,)):
            raise ValidationError("features, labels, domains and sessions must have one entry per sample")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("beam SNRs must be finite")
        if n and (self.labels.min() < 0 or self.labels.max() >= Config.N_CLASSES):
            raise ValidationError(f"pose labels must lie in 0..{Config.N_CLASSES - 1}")

    @classmethod
    def from_samples(cls, samples: Iterable[BeamSnrSample]):
        samples = list(samples)
        return cls(
            [s.features for s in samples] or np.empty((0, Config.N_FEATURES)),
            [s.label for s in samples],
            [s.domain for s in samples],
            [s.session for s in samples],
        )

    def __len__(self):
        return self.features.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self.sample(i)

    def __eq__(self, other):
        return (isinstance(other, Dataset)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.domains, other.domains)
                and np.array_equal(self.sessions, other.sessions))

    def sample(self, i) -> BeamSnrSample:
        return BeamSnrSample(tuple(self.features[i].tolist()), int(self.labels[i]),
                             Domain(self.domains[i]), int(self.sessions[i]))

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices],
                       self.domains[indices], self.sessions[indices])

    def domain_indices(self, domain):
        return np.flatnonzero(self.domains == Domain.parse(domain).value)

    def domain(self, domain):
        return self.subset(self.domain_indices(domain))

    def class_counts(self):
        return np.bincount(self.labels, minlength=Config.N_CLASSES)

    def counts_table(self):
        """Per-pose sample counts for each domain, with a total row"""
        table = pd.DataFrame(
            {d.value: self.domain(d).class_counts() for d in Domain},
            index=pd.Index(range(Config.N_CLASSES), name='pose'),
        )
        table.loc['total'] = table.sum()
        return table

    def to_frame(self):
        frame = pd.DataFrame(self.features, columns=feature_columns())
        frame.insert(0, 'session', self.sessions)
        frame.insert(0, 'domain', self.domains)
        frame.insert(0, 'label', self.labels)
        return frame

    def content_hash(self):
        """git blob hash of the canonical CSV serialization"""
        from data_collection.csv_io import to_csv_text

        body = to_csv_text(self).encode('utf-8')
        return hashlib.sha1(b'blob %d\0' % len(body) + body).hexdigest()


def feature_columns():
    return [f'b{i}' for i in range(Config.N_FEATURES)]


def csv_columns():
    return ['label', 'domain', 'session'] + feature_columns()
