"""Accuracy, confusion matrix and one-vs-rest ROC / AUC for the 8-pose task.

ROC points come from scikit-learn with every distinct threshold kept.
AUC is computed exactly: the trapezoid over tie-collapsed ROC points is an
integer sum, so the result equals P(score_pos > score_neg) + 1/2 P(tie) as a
rational before the final conversion to float.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple
import logging
import warnings

import numpy as np
from sklearn.exceptions import UndefinedMetricWarning
from sklearn.metrics import confusion_matrix, roc_curve as sk_roc_curve

from config import Config
from utils.errors import ValidationError

logger = logging.getLogger('beam_qtl.evaluator')


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float  # NaN when the class has no positives or no negatives


def _roc_counts(scores, indicator):
    """Tie-collapsed ROC points as integer (tps, fps) with thresholds; the first point is (0, 0) at +inf"""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    indicator = np.asarray(indicator, dtype=bool).ravel()
    if scores.shape != indicator.shape:
        raise ValidationError(f"{scores.size} scores but {indicator.size} indicators")
    if scores.size == 0:
        raise ValidationError("cannot build a ROC curve from zero scores")
    pos = int(indicator.sum())
    neg = int(indicator.size - pos)
    with warnings.catch_warnings():
        # one-class indicators: sklearn fills the undefined rate with NaN
        warnings.simplefilter('ignore', UndefinedMetricWarning)
        fpr, tpr, thresholds = sk_roc_curve(indicator.astype(np.int64), scores, pos_label=1,
                                            drop_intermediate=False)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    thresholds[0] = np.inf
    tps = np.rint(tpr * pos).astype(np.int64) if pos else np.zeros(fpr.size, dtype=np.int64)
    fps = np.rint(fpr * neg).astype(np.int64) if neg else np.zeros(tpr.size, dtype=np.int64)
    return tps, fps, thresholds, pos, neg


def _trapezoid(tps, fps, pos, neg) -> Optional[Fraction]:
    if pos == 0 or neg == 0:
        return None
    twice_area = sum(int(df) * int(t0 + t1) for df, t0, t1 in zip(np.diff(fps), tps[:-1], tps[1:]) if df)
    return Fraction(twice_area, 2 * pos * neg)


def roc_auc_exact(scores, indicator) -> Optional[Fraction]:
    tps, fps, _, pos, neg = _roc_counts(scores, indicator)
    return _trapezoid(tps, fps, pos, neg)


def roc_curve(scores, indicator) -> RocCurve:
    tps, fps, thresholds, pos, neg = _roc_counts(scores, indicator)
    fpr = fps / neg if neg else np.full(fps.shape, np.nan)
    tpr = tps / pos if pos else np.full(tps.shape, np.nan)
    auc = _trapezoid(tps, fps, pos, neg)
    return RocCurve(fpr, tpr, thresholds, float(auc) if auc is not None else float('nan'))


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows = true class, columns = predicted class
    roc: Dict[int, RocCurve]
    class_auc: np.ndarray
    macro_auc: float
    micro_auc: float
    micro_roc: RocCurve
    n_samples: int
    predictions: np.ndarray = field(repr=False, default=None)

    def class_counts(self):
        return self.confusion.sum(axis=1)

    def to_summary(self):
        def clean(x):
            return None if np.isnan(x) else float(x)

        return {
            'n_samples': int(self.n_samples),
            'accuracy': float(self.accuracy),
            'class_auc': [clean(a) for a in self.class_auc],
            'macro_auc': clean(self.macro_auc),
            'micro_auc': clean(self.micro_auc),
            'class_counts': self.class_counts().tolist(),
        }


def evaluate_scores(scores, labels, n_classes=Config.N_CLASSES) -> EvalReport:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValidationError("cannot evaluate on an empty sample set")
    if scores.shape != (labels.size, n_classes):
        raise ValidationError(f"scores must have shape ({labels.size}, {n_classes}), got {scores.shape}")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValidationError(f"labels must lie in 0..{n_classes - 1}")

    predictions = np.argmax(scores, axis=1)
    confusion = confusion_matrix(labels, predictions, labels=list(range(n_classes)))
    onehot = np.eye(n_classes, dtype=bool)[labels]

    roc = {k: roc_curve(scores[:, k], onehot[:, k]) for k in range(n_classes)}
    class_auc = np.array([roc[k].auc for k in range(n_classes)])
    undefined = np.flatnonzero(np.isnan(class_auc))
    if undefined.size:
        logger.warning(f"AUC undefined for classes {undefined.tolist()} (no positives or no negatives)")
    macro = float(np.nanmean(class_auc)) if undefined.size < n_classes else float('nan')
    micro_roc = roc_curve(scores.ravel(), onehot.ravel())

    return EvalReport(
        accuracy=float(np.trace(confusion) / labels.size),
        confusion=confusion,
        roc=roc,
        class_auc=class_auc,
        macro_auc=macro,
        micro_auc=micro_roc.auc,
        micro_roc=micro_roc,
        n_samples=int(labels.size),
        predictions=predictions,
    )


def evaluate(model, samples) -> EvalReport:
    """Score a dataset with any model exposing ``scores(features)``"""
    if len(samples) == 0:
        raise ValidationError("cannot evaluate on an empty sample set")
    report = evaluate_scores(model.scores(samples.features), samples.labels)
    logger.info(f"Evaluated {getattr(model, 'kind', 'model')} on {report.n_samples} samples: "
                f"accuracy {report.accuracy:.4f}, macro AUC {report.macro_auc:.4f}")
    return report


def accuracy(model, samples) -> float:
    predictions = np.argmax(model.scores(samples.features), axis=1)
    return float(np.mean(predictions == samples.labels))


def mean_std(values) -> Tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    return float(values.mean()), float(values.std())
