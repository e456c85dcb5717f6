"""Baseline detector: one rate-of-change feature against a threshold."""
import dataclasses
import logging

import numpy as np

from utils.errors import DegenerateTraining

logger = logging.getLogger(__name__)

N_DIFFS = 7


@dataclasses.dataclass(frozen=True)
class SlopeModel:
    diff_index: int = 6
    threshold: float = 0.0
    training_errors: int = 0

    def __post_init__(self):
        if not 0 <= self.diff_index < N_DIFFS:
            raise ValueError("diff_index must be in [0, %d]" % (N_DIFFS - 1))


def classify_slope(model, fv):
    """0 (acid, pH falling) below the threshold, 1 at or above it."""
    diffs = fv.diffs if hasattr(fv, "diffs") else np.asarray(fv)
    return 0 if diffs[model.diff_index] < model.threshold else 1


def _sweep(values, labels):
    """Training errors for every distinct cut: below all values, between neighbours, above all."""
    uniq, inverse = np.unique(values, return_inverse=True)
    zeros_at = np.bincount(inverse, weights=(labels == 0), minlength=uniq.size)
    ones_at = np.bincount(inverse, weights=(labels == 1), minlength=uniq.size)
    # cut k: the k smallest distinct values decide 0, k = 0..len(uniq)
    zeros_le = np.concatenate([[0.0], np.cumsum(zeros_at)])
    ones_le = np.concatenate([[0.0], np.cumsum(ones_at)])
    errors = (zeros_at.sum() - zeros_le) + ones_le
    thresholds = np.concatenate([uniq[:1], (uniq[:-1] + uniq[1:]) / 2.0,
                                 [np.nextafter(uniq[-1], np.inf)]])
    return thresholds, np.rint(errors).astype(np.int64)


def train_slope(features, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if not np.any(labels == 0) or not np.any(labels == 1):
        raise DegenerateTraining("slope training needs both bit values")
    diffs = np.stack([fv.diffs if hasattr(fv, "diffs") else np.asarray(fv) for fv in features])

    best = None
    for index in range(N_DIFFS):
        thresholds, errors = _sweep(diffs[:, index], labels)
        for t, err in zip(thresholds, errors):
            # fewest errors, then larger index, then threshold nearest 0
            key = (int(err), -index, abs(float(t)))
            if best is None or key < best[0]:
                best = (key, index, float(t))

    (errors, _, _), index, threshold = best
    logger.info("Slope detector: diff index %d, threshold %.5f, %d/%d training errors",
                index, threshold, errors, len(labels))
    return SlopeModel(diff_index=index, threshold=threshold, training_errors=errors)
