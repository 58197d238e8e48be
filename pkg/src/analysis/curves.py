import logging

import numpy as np
import pandas as pd

from analysis.evaluator import accuracy, mean_std
from data_collection.dataset import Dataset, Domain
from data_collection.splits import split_labeled
from utils.errors import ValidationError
from utils import rng

logger = logging.getLogger('beam_qtl.curves')

CURVE_COLUMNS = ['n_labeled', 'mean_acc', 'std_acc', 'source_mean_acc', 'source_std_acc']


def accuracy_vs_samples_curve(model_factory, dataset: Dataset, grid, seed=0, n_repeats=1,
                              eval_limit=None) -> pd.DataFrame:
    """Target accuracy of source-trained models against the number of labeled source samples.

    ``model_factory(labeled, seed)`` must return a trained model. Each grid point and
    repeat trains a fresh model on its own seeded stratified source subset. Source
    accuracy is measured on the source samples left out of that subset (NaN when the
    subset is the whole source domain).
    """
    grid = [int(n) for n in grid]
    available = len(dataset.domain_indices(Domain.SOURCE))
    if not grid:
        raise ValidationError("sample grid is empty")
    for n in grid:
        if not 1 <= n <= available:
            raise ValidationError(f"grid value {n} must lie in 1..{available} (labeled source samples)")
    if n_repeats < 1:
        raise ValidationError(f"n_repeats must be >= 1, got {n_repeats}")

    target = dataset.domain(Domain.TARGET)
    if eval_limit is not None and len(target) > eval_limit:
        keep = np.sort(rng.stream(seed, 'curve').permutation(len(target))[:eval_limit])
        target = target.subset(keep)
    if len(target) == 0:
        raise ValidationError("dataset has no target-domain samples to evaluate on")

    rows = []
    for n in grid:
        target_acc, source_acc = [], []
        for r in range(n_repeats):
            split = split_labeled(dataset, Domain.SOURCE, count=n, seed=seed, key=(n, r))
            model = model_factory(split.labeled, rng.derive_seed(seed, 'curve', n, r))
            target_acc.append(accuracy(model, target))
            held_out = split.evaluation
            if eval_limit is not None and len(held_out) > eval_limit:
                held_out = held_out.subset(np.arange(eval_limit))
            source_acc.append(accuracy(model, held_out) if len(held_out) else float('nan'))

        mean_acc, std_acc = mean_std(target_acc)
        source_mean, source_std = mean_std(source_acc)
        rows.append({
            'n_labeled': n,
            'mean_acc': mean_acc,
            'std_acc': std_acc,
            'source_mean_acc': source_mean,
            'source_std_acc': source_std,
        })
        logger.info(f"Curve point n={n}: target accuracy {mean_acc:.4f} +/- {std_acc:.4f}, "
                    f"source accuracy {source_mean:.4f}")
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)
