import dataclasses
import logging

import numpy as np

from .errors import SyncNotFound, TraceTooShort
from .features import bin_features, feature_matrix
from .framing import FrameSpec, detect_sync, slice_symbols

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Receiver:
    """Sync -> slice -> bin front end shared by training and evaluation."""
    frame_template: FrameSpec = FrameSpec()
    noise_std_ph: float = 0.0

    def frame_for(self, record):
        return record.frame_spec(self.frame_template)

    def interval_ms(self, record):
        return self.frame_for(record).interval_ms

    def features(self, record):
        """Per-symbol FeatureVectors; raises SyncNotFound / TraceTooShort."""
        spec = self.frame_for(record)
        onset = detect_sync(record.trace, spec, noise_std_ph=self.noise_std_ph)
        windows = slice_symbols(record.trace, onset, spec, len(record.bits))
        return [bin_features(w) for w in windows]

    def try_features(self, record):
        try:
            return self.features(record)
        except (SyncNotFound, TraceTooShort) as e:
            logger.warning("Record %d: receiver failed (%s)", record.index, e)
            return None


def get_loader(records, receiver):
    """(record, feature list) pairs for records the receiver can synchronize to."""
    pairs = []
    for r in records:
        fvs = receiver.try_features(r)
        if fvs is not None:
            pairs.append((r, fvs))
    if len(pairs) < len(records):
        logger.info("  Skipped %d unsynchronized record(s)", len(records) - len(pairs))
    return pairs


def symbol_dataset(pairs, kind):
    """Flattened per-symbol features and labels over all records."""
    if not pairs:
        return feature_matrix([], kind), np.zeros(0, dtype=np.int64)
    X = np.concatenate([feature_matrix(fvs, kind) for _, fvs in pairs])
    y = np.concatenate([np.asarray(r.bits, dtype=np.int64) for r, _ in pairs])
    return X, y


def sequence_dataset(pairs, kind="rnn", sequence_length=120):
    """Records chopped into consecutive length-K (inputs, labels) sequences."""
    sequences = []
    for r, fvs in pairs:
        X = feature_matrix(fvs, kind)
        y = np.asarray(r.bits, dtype=np.int64)
        for start in range(0, len(y), sequence_length):
            sequences.append((X[start:start + sequence_length], y[start:start + sequence_length]))
    return sequences
