"""Seeded stand-in for measured beam SNR sessions.

Each pose has an anchor beam SNR profile. Source-domain samples scatter around
the anchors; target-domain samples see a per-beam gain and a common offset on
top, the way a re-deployed station sees the same poses through a changed channel.

The offset points along a random mix of the centred anchors, so it moves poses
toward each other rather than off into unused feature space. With a reference
accuracy set, its size is searched per dataset until the nearest-anchor rule
scores that accuracy on the target samples, which pins how hard the shift is
independently of the seed.
"""
from dataclasses import dataclass
from typing import Optional
import logging

import numpy as np

from config import Config
from data_collection.dataset import Dataset, Domain
from utils.errors import ValidationError
from utils import rng

logger = logging.getLogger('beam_qtl.synthetic')

BISECTION_STEPS = 40


@dataclass(frozen=True)
class ShiftSpec:
    mean_offset_scale: float    # offset length in RMS anchor radii
    feature_gain_spread: float  # std of the per-beam gain around 1
    noise_sigma_source: float   # dB
    noise_sigma_target: float   # dB
    seed: int = 0
    reference_accuracy: Optional[float] = None  # calibrate to this nearest-anchor target accuracy
    strength: float = 1.0                       # multiplies the (calibrated) shift

    def __post_init__(self):
        for name in ('mean_offset_scale', 'feature_gain_spread', 'noise_sigma_source', 'noise_sigma_target',
                     'strength'):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be a non-negative number, got {value}")
        if self.reference_accuracy is not None and not 0.0 < self.reference_accuracy < 1.0:
            raise ValidationError(f"reference_accuracy must lie in (0, 1), got {self.reference_accuracy}")

    @property
    def is_null(self):
        return self.strength == 0 or (self.mean_offset_scale == 0 and self.feature_gain_spread == 0)


@dataclass(frozen=True)
class TargetShift:
    """Resolved per-beam gain and offset applied to the target anchors"""
    gain: np.ndarray
    offset: np.ndarray
    multiplier: float  # search result times strength; 1.0 for an uncalibrated spec

    def centers(self, anchors):
        return self.gain * anchors + self.offset


def nearest_anchor_accuracy(features, labels, anchors) -> float:
    """Fraction of samples whose closest anchor (Euclidean, dB) is their own class"""
    d2 = np.sum(features ** 2, axis=1)[:, None] - 2.0 * features @ anchors.T + np.sum(anchors ** 2, axis=1)[None, :]
    return float(np.mean(np.argmin(d2, axis=1) == labels))


def offset_direction(anchors, generator):
    """Unit vector along a random Gaussian mix of the centred anchors; zero if the anchors coincide"""
    centred = anchors - anchors.mean(axis=0)
    direction = generator.normal(0.0, 1.0, size=anchors.shape[0]) @ centred
    norm = np.linalg.norm(direction)
    return direction / norm if norm > 0 else np.zeros(anchors.shape[1])


def search_multiplier(reference, target_accuracy, upper, steps) -> float:
    """Smallest shift multiplier at which ``reference(m)`` falls to ``target_accuracy``

    Scans ``[0, upper]`` for the first grid point at or below the target, then
    bisects the bracketing interval.
    """
    if reference(0.0) <= target_accuracy:
        logger.warning(f"Unshifted target already scores {reference(0.0):.4f} <= {target_accuracy}; "
                       "no shift applied")
        return 0.0
    grid = np.linspace(0.0, upper, steps + 1)
    for lo, hi in zip(grid[:-1], grid[1:]):
        if reference(hi) <= target_accuracy:
            break
    else:
        logger.warning(f"Shift multiplier capped at {upper}: reference accuracy {reference(upper):.4f}")
        return float(upper)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if reference(mid) > target_accuracy:
            lo = mid
        else:
            hi = mid
    return float(hi)


def resolve_shift(shift: ShiftSpec, anchors, tgt_labels, tgt_noise) -> TargetShift:
    """Draw the gain/offset shape from the seed and fix its size

    ``tgt_noise`` is the already scaled per-sample target noise; it takes part in
    the calibration so the searched size reflects the actual target samples.
    """
    n_features = anchors.shape[1]
    if shift.is_null:
        return TargetShift(np.ones(n_features), np.zeros(n_features), 0.0)

    shift_gen = rng.stream(shift.seed, 'target_shift')
    gain_shape = shift.feature_gain_spread * shift_gen.normal(0.0, 1.0, size=n_features)
    radius = float(np.sqrt(np.mean(np.sum((anchors - anchors.mean(axis=0)) ** 2, axis=1))))
    offset_shape = shift.mean_offset_scale * radius * offset_direction(anchors, shift_gen)

    def scaled(m):
        return TargetShift(1.0 + m * gain_shape, m * offset_shape, m)

    multiplier = 1.0
    if shift.reference_accuracy is not None:
        def reference(m):
            centers = scaled(m).centers(anchors)
            return nearest_anchor_accuracy(centers[tgt_labels] + tgt_noise, tgt_labels, anchors)

        multiplier = search_multiplier(reference, shift.reference_accuracy,
                                       Config.SHIFT_SEARCH_MAX, Config.SHIFT_SEARCH_STEPS)
        logger.info(f"Calibrated shift multiplier {multiplier:.4f} for reference accuracy "
                    f"{shift.reference_accuracy} (seed {shift.seed})")
    return scaled(multiplier * shift.strength)


def class_allocation(n, proportions):
    """Split ``n`` into integer class counts proportional to ``proportions`` (largest remainder)"""
    weights = np.asarray(proportions, dtype=np.float64)
    if n < 0 or weights.ndim != 1 or np.any(weights < 0) or weights.sum() <= 0:
        raise ValidationError(f"cannot allocate {n} samples over proportions {proportions}")
    raw = n * weights / weights.sum()
    counts = np.floor(raw).astype(np.int64)
    remainder = int(n - counts.sum())
    # Stable sort keeps the lower class index first among equal remainders
    order = np.argsort(-(raw - counts), kind='stable')
    counts[order[:remainder]] += 1
    return counts


def synthetic_anchors(seed, anchor_scale=None):
    """Per-pose anchor beam SNR profiles, one row per class"""
    anchor_scale = Config.ANCHOR_SCALE_DB if anchor_scale is None else anchor_scale
    return rng.stream(seed, 'anchors').normal(0.0, anchor_scale, size=(Config.N_CLASSES, Config.N_FEATURES))


def _domain_block(labels, sessions_pool, gen_sessions):
    return gen_sessions.choice(np.asarray(sessions_pool), size=labels.shape[0])


def generate_synthetic(n_source: int, n_target: int, shift: ShiftSpec,
                       source_proportions=None, target_proportions=None,
                       anchor_scale=None) -> Dataset:
    if n_source < 1 or n_target < 1:
        raise ValidationError(f"sample counts must be positive, got {n_source} source / {n_target} target")
    seed = shift.seed
    anchors = synthetic_anchors(seed, anchor_scale)

    if source_proportions is None:
        source_proportions = Config.SOURCE_CLASS_COUNTS
    if target_proportions is None:
        target_proportions = Config.TARGET_CLASS_COUNTS

    src_counts = class_allocation(n_source, source_proportions)
    src_labels = np.repeat(np.arange(Config.N_CLASSES), src_counts)
    src_noise = rng.stream(seed, 'source_noise').normal(0.0, 1.0, size=(n_source, Config.N_FEATURES))
    src_features = anchors[src_labels] + shift.noise_sigma_source * src_noise
    src_sessions = _domain_block(src_labels, Config.SOURCE_SESSIONS, rng.stream(seed, 'sessions', 0))

    tgt_counts = class_allocation(n_target, target_proportions)
    tgt_labels = np.repeat(np.arange(Config.N_CLASSES), tgt_counts)
    tgt_noise = shift.noise_sigma_target * rng.stream(seed, 'target_noise').normal(
        0.0, 1.0, size=(n_target, Config.N_FEATURES))
    target_shift = resolve_shift(shift, anchors, tgt_labels, tgt_noise)
    tgt_features = target_shift.centers(anchors)[tgt_labels] + tgt_noise
    tgt_sessions = _domain_block(tgt_labels, Config.TARGET_SESSIONS, rng.stream(seed, 'sessions', 1))

    dataset = Dataset(
        np.concatenate([src_features, tgt_features]),
        np.concatenate([src_labels, tgt_labels]),
        [Domain.SOURCE.value] * n_source + [Domain.TARGET.value] * n_target,
        np.concatenate([src_sessions, tgt_sessions]),
    )
    logger.info(f"Generated synthetic dataset: {n_source} source / {n_target} target samples (seed {seed})")
    return dataset
