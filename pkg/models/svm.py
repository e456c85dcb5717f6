"""RBF kernel SVM symbol detector trained with an SMO dual solver.

Decision: sgn(b + sum_i alpha_i x'_i k(y, y_i)), x' = 2x - 1.
"""
import dataclasses
import logging

import numpy as np
from scipy.spatial.distance import cdist

from utils.errors import DegenerateTraining, NoConvergence

logger = logging.getLogger(__name__)

TAU = 1e-12


@dataclasses.dataclass
class SvmModel:
    support_vectors: np.ndarray
    coeffs: np.ndarray
    bias: float
    sigma_sq: float = 5.0
    c_reg: float = 1.0
    feature_mean: np.ndarray = None
    feature_scale: np.ndarray = None
    iterations: int = 0
    kkt_violation: float = 0.0

    def __post_init__(self):
        if self.sigma_sq <= 0:
            raise ValueError("sigma_sq must be > 0")
        if self.c_reg <= 0:
            raise ValueError("c_reg must be > 0")
        self.support_vectors = np.atleast_2d(np.asarray(self.support_vectors, dtype=np.float64))
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64).reshape(-1)
        if len(self.coeffs) == 0:
            self.support_vectors = self.support_vectors.reshape(0, self.support_vectors.shape[-1])
        if self.support_vectors.shape[0] != self.coeffs.shape[0]:
            raise ValueError("support_vectors and coeffs must have the same length")

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.feature_mean is None:
            return X
        return (X - self.feature_mean) / self.feature_scale


def rbf_kernel(u, v, sigma_sq):
    if sigma_sq <= 0:
        raise ValueError("sigma_sq must be > 0")
    d = np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)
    return float(np.exp(-np.dot(d, d) / (2.0 * sigma_sq)))


def rbf_gram(A, B, sigma_sq):
    return np.exp(-cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean") / (2.0 * sigma_sq))


def standardization(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _bounds(y, c_reg):
    # beta_i = y_i alpha_i lives in [A_i, B_i]
    A = np.where(y > 0, 0.0, -c_reg)
    B = np.where(y > 0, c_reg, 0.0)
    return A, B


def kkt_violation(beta, g, y, c_reg):
    """m(alpha) - M(alpha) over the maximal violating pair, with g = 1 - Q alpha."""
    A, B = _bounds(y, c_reg)
    yg = y * g
    up = beta < B
    low = beta > A
    if not up.any() or not low.any():
        return 0.0
    return float(yg[up].max() - yg[low].min())


def smo(K, y, c_reg, tol=1e-3, max_iter=1000000):
    """Two-coordinate dual ascent with maximal-violating-pair selection.

    Returns (beta, g, iterations) with beta_i = y_i alpha_i and g = 1 - Q alpha.
    """
    n = len(y)
    A, B = _bounds(y, c_reg)
    beta = np.zeros(n)
    g = np.ones(n)
    diag = np.diag(K).copy()

    for it in range(max_iter):
        yg = y * g
        up = beta < B
        low = beta > A
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(low, yg, np.inf)))
        gap = yg[i] - yg[j]
        if gap < tol:
            return beta, g, it
        eta = diag[i] + diag[j] - 2.0 * K[i, j]
        if eta <= 0:
            eta = TAU
        lam = min(B[i] - beta[i], beta[j] - A[j], gap / eta)
        beta[i] += lam
        beta[j] -= lam
        g += lam * y * (K[j] - K[i])

    raise NoConvergence(max_iter, kkt_violation(beta, g, y, c_reg))


def _bias(beta, g, y, c_reg):
    A, B = _bounds(y, c_reg)
    yg = y * g
    free = (beta > A) & (beta < B)
    if free.any():
        return float(yg[free].mean())
    up = beta < B
    low = beta > A
    hi = yg[up].max() if up.any() else yg.min()
    lo = yg[low].min() if low.any() else yg.max()
    return float((hi + lo) / 2.0)


def train_svm(features, labels, sigma_sq=5.0, c_reg=1.0, tol=1e-3, max_iter=1000000,
              standardize=True, sv_threshold=None):
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if not np.any(labels == 0) or not np.any(labels == 1):
        raise DegenerateTraining("SVM training needs both bit values")
    y = 2.0 * labels - 1.0

    mean = scale = None
    if standardize:
        mean, scale = standardization(X)
        X = (X - mean) / scale

    logger.info("***** Running SVM training *****")
    logger.info("  Num examples = %d, sigma^2 = %g, C = %g", len(y), sigma_sq, c_reg)
    K = rbf_gram(X, X, sigma_sq)
    beta, g, iterations = smo(K, y, c_reg, tol=tol, max_iter=max_iter)
    violation = kkt_violation(beta, g, y, c_reg)
    bias = _bias(beta, g, y, c_reg)

    if sv_threshold is None:
        sv_threshold = 1e-10 * c_reg
    keep = np.abs(beta) > sv_threshold
    logger.info("  SMO converged in %d pair updates, KKT violation %.2e, %d support vectors",
                iterations, violation, int(keep.sum()))
    return SvmModel(support_vectors=X[keep], coeffs=beta[keep], bias=bias, sigma_sq=sigma_sq,
                    c_reg=c_reg, feature_mean=mean, feature_scale=scale,
                    iterations=iterations, kkt_violation=violation)


def decision_function(model, X):
    """b + sum_i coeffs_i k(x, sv_i) for every row of X (raw features)."""
    Z = model.transform(X)
    if len(model.coeffs) == 0:
        return np.full(Z.shape[0], model.bias)
    return rbf_gram(Z, model.support_vectors, model.sigma_sq) @ model.coeffs + model.bias


def classify_svm(model, fv):
    return int(decision_function(model, fv)[0] >= 0)


def classify_batch(model, X):
    return (decision_function(model, X) >= 0).astype(np.int64)


def select_hyperparameters(X_fit, y_fit, X_val, y_val, c_grid=(0.1, 1.0, 10.0), sigma_sq_grid=(5.0,),
                           default_sigma_sq=5.0, **kwargs):
    """Grid search on a validation split; ties go to smaller C, then sigma^2 nearest the default."""
    results = []
    for sigma_sq in sigma_sq_grid:
        for c_reg in c_grid:
            model = train_svm(X_fit, y_fit, sigma_sq=sigma_sq, c_reg=c_reg, **kwargs)
            errors = int((classify_batch(model, X_val) != np.asarray(y_val)).sum())
            logger.info("  sigma^2 = %g, C = %g: %d/%d validation errors",
                        sigma_sq, c_reg, errors, len(y_val))
            results.append({"sigma_sq": sigma_sq, "c_reg": c_reg, "val_errors": errors,
                            "val_bits": len(y_val)})
    best = min(results, key=lambda r: (r["val_errors"], r["c_reg"],
                                       abs(r["sigma_sq"] - default_sigma_sq)))
    return best, results
