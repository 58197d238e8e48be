from dataclasses import dataclass
import logging

import numpy as np

from config import Config
from data_collection.dataset import Dataset, Domain
from data_collection.synthetic import class_allocation
from utils.errors import ValidationError
from utils import rng

logger = logging.getLogger('beam_qtl.splits')


@dataclass(frozen=True)
class SplitResult:
    labeled: Dataset
    evaluation: Dataset
    labeled_indices: np.ndarray     # indices into the original dataset
    evaluation_indices: np.ndarray
    stratified: bool


def _stratified_allocation(size, class_sizes):
    """One sample per present class first, the rest proportional to what is left"""
    present = class_sizes > 0
    base = present.astype(np.int64)
    extra = class_allocation(size - int(base.sum()), np.maximum(class_sizes - base, 0)) \
        if size > base.sum() else np.zeros_like(base)
    return base + extra


def split_labeled(dataset: Dataset, domain, count=None, fraction=None, seed=0, stratify=True,
                  key=()) -> SplitResult:
    """Draw a labeled subset of one domain; the rest of that domain is the evaluation subset.

    ``key`` adds integer components to the split stream, so repeated experiments
    can draw independent subsets from one seed.
    """
    if (count is None) == (fraction is None):
        raise ValidationError("give exactly one of count or fraction")
    pool = dataset.domain_indices(domain)
    n = pool.shape[0]
    if fraction is not None:
        if not 0.0 <= fraction <= 1.0:
            raise ValidationError(f"fraction must lie in [0, 1], got {fraction}")
        size = int(round(fraction * n))
    else:
        size = int(count)
    if not 0 <= size <= n:
        raise ValidationError(f"requested {size} labeled samples but the {Domain.parse(domain).value} domain has {n}")

    gen = rng.stream(seed, 'split', *key)
    labels = dataset.labels[pool]
    class_sizes = np.bincount(labels, minlength=Config.N_CLASSES)
    can_stratify = stratify and np.all(class_sizes > 0) and size >= Config.N_CLASSES
    if stratify and not can_stratify and 0 < size < n:
        logger.warning(
            f"Stratified split impossible ({size} samples, class sizes {class_sizes.tolist()}); "
            "falling back to uniform sampling"
        )

    if can_stratify:
        chosen = []
        for c, take in enumerate(_stratified_allocation(size, class_sizes)):
            members = pool[labels == c]
            chosen.append(gen.permutation(members)[:take])
        labeled_idx = np.sort(np.concatenate(chosen))
    else:
        labeled_idx = np.sort(gen.permutation(pool)[:size])

    eval_idx = np.setdiff1d(pool, labeled_idx, assume_unique=True)
    logger.debug(f"Split {Domain.parse(domain).value}: {labeled_idx.size} labeled / {eval_idx.size} evaluation")
    return SplitResult(
        labeled=dataset.subset(labeled_idx),
        evaluation=dataset.subset(eval_idx),
        labeled_indices=labeled_idx,
        evaluation_indices=eval_idx,
        stratified=bool(can_stratify),
    )
