# coding=utf-8
"""Per-interval detectors behind one `decode(feature vectors) -> bits` interface."""
import logging
import os

import numpy as np
import pandas as pd
import torch
from torch.utils.tensorboard import SummaryWriter

from models.rnn import DTYPE, RnnModel, TrainConfig, detect_sequence, train_rnn
from models.slope import SlopeModel, classify_slope, train_slope
from models.svm import SvmModel, classify_batch, select_hyperparameters, train_svm
from utils.data_utils import get_loader, sequence_dataset, symbol_dataset
from utils.dataset import group_by_interval
from utils.errors import DegenerateTraining, InvalidConfig
from utils.features import feature_matrix
from utils.io_utils import read_model_file, write_model_file

logger = logging.getLogger(__name__)

DETECTOR_NAMES = ("slope", "svm", "rnn")


def _array_payload(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "values": a.reshape(-1).tolist()}


def _array(payload):
    if payload is None:
        return None
    return np.asarray(payload["values"], dtype=np.float64).reshape(payload["shape"])


class SlopeDetector(object):
    name = "slope"

    def __init__(self, model, interval_ms, train_indices=()):
        self.model = model
        self.interval_ms = interval_ms
        self.train_indices = tuple(int(i) for i in train_indices)

    def decode(self, fvs):
        return np.array([classify_slope(self.model, fv) for fv in fvs], dtype=np.int64)

    def to_payload(self):
        return {"detector": self.name, "interval_ms": self.interval_ms,
                "train_indices": list(self.train_indices),
                "diff_index": self.model.diff_index, "threshold": self.model.threshold,
                "training_errors": self.model.training_errors}

    @classmethod
    def from_payload(cls, payload):
        model = SlopeModel(diff_index=int(payload["diff_index"]), threshold=float(payload["threshold"]),
                           training_errors=int(payload["training_errors"]))
        return cls(model, int(payload["interval_ms"]), payload["train_indices"])


class SvmDetector(object):
    name = "svm"

    def __init__(self, model, interval_ms, train_indices=()):
        self.model = model
        self.interval_ms = interval_ms
        self.train_indices = tuple(int(i) for i in train_indices)

    def decode(self, fvs):
        if not fvs:
            return np.zeros(0, dtype=np.int64)
        return classify_batch(self.model, feature_matrix(fvs, "svm"))

    def to_payload(self):
        m = self.model
        return {"detector": self.name, "interval_ms": self.interval_ms,
                "train_indices": list(self.train_indices),
                "support_vectors": _array_payload(m.support_vectors),
                "coeffs": _array_payload(m.coeffs), "bias": float(m.bias),
                "sigma_sq": float(m.sigma_sq), "c_reg": float(m.c_reg),
                "feature_mean": None if m.feature_mean is None else _array_payload(m.feature_mean),
                "feature_scale": None if m.feature_scale is None else _array_payload(m.feature_scale),
                "iterations": int(m.iterations), "kkt_violation": float(m.kkt_violation)}

    @classmethod
    def from_payload(cls, payload):
        model = SvmModel(support_vectors=_array(payload["support_vectors"]),
                         coeffs=_array(payload["coeffs"]), bias=float(payload["bias"]),
                         sigma_sq=float(payload["sigma_sq"]), c_reg=float(payload["c_reg"]),
                         feature_mean=_array(payload["feature_mean"]),
                         feature_scale=_array(payload["feature_scale"]),
                         iterations=int(payload["iterations"]),
                         kkt_violation=float(payload["kkt_violation"]))
        return cls(model, int(payload["interval_ms"]), payload["train_indices"])


class RnnDetector(object):
    """Decodes a record in consecutive chunks of `sequence_length` symbols, each from h0 = 0."""
    name = "rnn"

    def __init__(self, model, interval_ms, train_indices=(), sequence_length=120):
        self.model = model
        self.interval_ms = interval_ms
        self.train_indices = tuple(int(i) for i in train_indices)
        self.sequence_length = int(sequence_length)

    def decode(self, fvs):
        if not fvs:
            return np.zeros(0, dtype=np.int64)
        Y = feature_matrix(fvs, "rnn")
        K = self.sequence_length
        return np.concatenate([detect_sequence(self.model, Y[start:start + K])
                               for start in range(0, len(Y), K)])

    def to_payload(self):
        m = self.model
        return {"detector": self.name, "interval_ms": self.interval_ms,
                "train_indices": list(self.train_indices),
                "cell_kind": m.cell_kind, "input_dim": m.input_dim, "state_dim": m.state_dim,
                "sequence_length": self.sequence_length,
                "params": {k: _array_payload(v.detach().numpy()) for k, v in m.state_dict().items()}}

    @classmethod
    def from_payload(cls, payload):
        model = RnnModel(cell_kind=payload["cell_kind"], input_dim=int(payload["input_dim"]),
                         state_dim=int(payload["state_dim"]))
        model.load_state_dict({k: torch.as_tensor(_array(v), dtype=DTYPE)
                               for k, v in payload["params"].items()})
        model.eval()
        return cls(model, int(payload["interval_ms"]), payload["train_indices"],
                   sequence_length=payload["sequence_length"])


DETECTOR_CLASSES = {cls.name: cls for cls in (SlopeDetector, SvmDetector, RnnDetector)}


def model_path(out_dir, name, interval_ms):
    return os.path.join(out_dir, "%s_%dms.model" % (name, interval_ms))


def save_detector(out_dir, detector, provenance):
    path = model_path(out_dir, detector.name, detector.interval_ms)
    write_model_file(path, detector.to_payload(), provenance)
    return path


def load_detector(out_dir, name, interval_ms):
    payload, _ = read_model_file(model_path(out_dir, name, interval_ms))
    if payload.get("detector") not in DETECTOR_CLASSES:
        raise InvalidConfig('Unknown detector "%s" in model file' % payload.get("detector"))
    return DETECTOR_CLASSES[payload["detector"]].from_payload(payload)


def load_detectors(out_dir, name, intervals):
    return {ms: load_detector(out_dir, name, ms) for ms in sorted(intervals)}


def _train_slope(pairs, interval_ms, config, log_dir, progress):
    fvs = [fv for _, rec_fvs in pairs for fv in rec_fvs]
    labels = np.concatenate([np.asarray(r.bits, dtype=np.int64) for r, _ in pairs])
    model = train_slope(fvs, labels)
    log = [{"interval_ms": interval_ms, "diff_index": model.diff_index, "threshold": model.threshold,
            "training_errors": model.training_errors, "training_bits": len(labels)}]
    return SlopeDetector(model, interval_ms, [r.index for r, _ in pairs]), log


def _train_svm(pairs, interval_ms, config, log_dir, progress):
    svm = config.svm
    kwargs = dict(tol=svm.tol, max_iter=svm.max_iter, standardize=svm.standardize)
    sigma_sq, c_reg = svm.sigma_sq, svm.c_reg
    log = []
    if len(svm.c_grid) * len(svm.sigma_sq_grid) > 1 and len(pairs) >= 2:
        # validation records are held out whole so neighbouring symbols never straddle the split
        rng = np.random.default_rng(config.seeds.train)
        n_val = min(len(pairs) - 1, max(1, int(round(svm.val_fraction * len(pairs)))))
        perm = rng.permutation(len(pairs))
        val = [pairs[i] for i in sorted(perm[:n_val])]
        fit = [pairs[i] for i in sorted(perm[n_val:])]
        X_fit, y_fit = symbol_dataset(fit, "svm")
        X_val, y_val = symbol_dataset(val, "svm")
        logger.info("Tuning SVM on %d fit / %d validation records", len(fit), len(val))
        best, results = select_hyperparameters(X_fit, y_fit, X_val, y_val, c_grid=svm.c_grid,
                                               sigma_sq_grid=svm.sigma_sq_grid,
                                               default_sigma_sq=svm.sigma_sq, **kwargs)
        sigma_sq, c_reg = best["sigma_sq"], best["c_reg"]
        for r in results:
            log.append(dict(r, interval_ms=interval_ms, selected=(r is best)))
    X, y = symbol_dataset(pairs, "svm")
    model = train_svm(X, y, sigma_sq=sigma_sq, c_reg=c_reg, **kwargs)
    if not log:
        log.append({"sigma_sq": sigma_sq, "c_reg": c_reg, "val_errors": -1, "val_bits": 0,
                    "interval_ms": interval_ms, "selected": True})
    return SvmDetector(model, interval_ms, [r.index for r, _ in pairs]), log


def _train_rnn(pairs, interval_ms, config, log_dir, progress):
    rnn = config.rnn
    cfg = TrainConfig(learning_rate=rnn.learning_rate, epochs=rnn.epochs,
                      sequence_length=rnn.sequence_length, clip_norm=rnn.clip_norm,
                      seed=config.seeds.train, prob_floor=rnn.prob_floor,
                      val_fraction=rnn.val_fraction, batch_size=rnn.batch_size)
    sequences = sequence_dataset(pairs, "rnn", cfg.sequence_length)
    writer = None
    if log_dir is not None:
        writer = SummaryWriter(log_dir=os.path.join(log_dir, "rnn_%dms" % interval_ms))
    try:
        model = train_rnn(sequences, cfg, cell_kind=rnn.cell_kind, state_dim=rnn.state_dim,
                          writer=writer, progress=progress)
    finally:
        if writer is not None:
            writer.close()
    log = [{"interval_ms": interval_ms, "epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
           for epoch, train_loss, val_loss in model.loss_curve]
    detector = RnnDetector(model, interval_ms, [r.index for r, _ in pairs],
                           sequence_length=cfg.sequence_length)
    return detector, log


TRAINERS = {
    "slope": _train_slope,
    "svm": _train_svm,
    "rnn": _train_rnn,
}


def train_detectors(name, records, receiver, config, log_dir=None, progress=True):
    """One detector per symbol interval present in `records`; returns (detectors, training log)."""
    if name not in TRAINERS:
        raise InvalidConfig('Unknown detector "%s"' % name)
    detectors, log = {}, []
    for interval_ms, group in group_by_interval(records, receiver.frame_template).items():
        logger.info("***** Training %s detector for %d ms *****", name, interval_ms)
        logger.info("  Num records = %d", len(group))
        pairs = get_loader(group, receiver)
        if not pairs:
            raise DegenerateTraining("no synchronized training records at %d ms" % interval_ms)
        detectors[interval_ms], rows = TRAINERS[name](pairs, interval_ms, config, log_dir, progress)
        log.extend(rows)
    return detectors, pd.DataFrame(log)
