import dataclasses
import logging

import numpy as np
import pandas as pd

from .errors import WindowTooShort

logger = logging.getLogger(__name__)

N_BINS = 8
SVM_COLUMNS = (["bin%d" % i for i in range(N_BINS)] + ["binmean", "binvar"]
               + ["d%d" % i for i in range(N_BINS - 1)] + ["dmean", "dvar"])
RNN_COLUMNS = ["bin%d" % i for i in range(N_BINS)] + ["d%d" % i for i in range(N_BINS - 1)]


@dataclasses.dataclass(frozen=True)
class FeatureVector:
    bin_means: np.ndarray
    diffs: np.ndarray
    bin_mean_stat: tuple
    diff_stat: tuple


def bin_features(window):
    """8 contiguous bins of floor(len/8) samples, leftover samples go to the last bin."""
    x = np.asarray(window, dtype=np.float64)
    if x.size < N_BINS:
        raise WindowTooShort("window has %d samples, need at least %d" % (x.size, N_BINS))
    width = x.size // N_BINS
    edges = [i * width for i in range(N_BINS)] + [x.size]
    means = np.array([x[edges[i]:edges[i + 1]].mean() for i in range(N_BINS)])
    diffs = means[1:] - means[:-1]
    return FeatureVector(
        bin_means=means,
        diffs=diffs,
        bin_mean_stat=(float(means.mean()), float(means.var())),
        diff_stat=(float(diffs.mean()), float(diffs.var())),
    )


def svm_features(fv):
    return np.concatenate([fv.bin_means, fv.bin_mean_stat, fv.diffs, fv.diff_stat])


def rnn_features(fv):
    return np.concatenate([fv.bin_means, fv.diffs])


FEATURE_SETS = {
    "svm": (svm_features, SVM_COLUMNS),
    "rnn": (rnn_features, RNN_COLUMNS),
}


def feature_matrix(fvs, kind="svm"):
    fn, columns = FEATURE_SETS[kind]
    if not fvs:
        return np.zeros((0, len(columns)))
    return np.stack([fn(fv) for fv in fvs])


def feature_frame(fvs, bits=None):
    frame = pd.DataFrame(feature_matrix(fvs, "svm"), columns=SVM_COLUMNS)
    if bits is not None:
        frame["bit"] = np.asarray(bits, dtype=np.int64)
    return frame
