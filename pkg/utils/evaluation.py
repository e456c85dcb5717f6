import dataclasses
import logging
from collections import OrderedDict

import numpy as np
import pandas as pd
from tqdm import tqdm

from .errors import DataLeakage
from .io_utils import write_csv

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["detector", "interval_ms", "bits", "errors", "ber"]
EYE_COLUMNS = ["diff_index", "diff_value", "bit"]


@dataclasses.dataclass
class EvalRow:
    detector: str
    interval_ms: int
    bits: int = 0
    errors: int = 0
    sync_failures: int = 0

    @property
    def ber(self):
        return self.errors / self.bits if self.bits else 0.0


@dataclasses.dataclass
class EvalReport:
    rows: list = dataclasses.field(default_factory=list)
    provenance: dict = dataclasses.field(default_factory=dict)
    # (detector, record index) -> decided bits, None when the receiver lost sync
    decisions: dict = dataclasses.field(default_factory=dict)

    def row(self, detector, interval_ms):
        for r in self.rows:
            if r.detector == detector and r.interval_ms == interval_ms:
                return r
        raise KeyError((detector, interval_ms))

    def ber(self, detector, interval_ms):
        return self.row(detector, interval_ms).ber

    def merge(self, other):
        self.rows.extend(other.rows)
        self.decisions.update(other.decisions)
        self.provenance.update(other.provenance)
        return self

    def to_frame(self):
        return pd.DataFrame([{"detector": r.detector, "interval_ms": r.interval_ms, "bits": r.bits,
                              "errors": r.errors, "ber": r.ber} for r in self.rows],
                            columns=REPORT_COLUMNS)

    def format_table(self):
        lines = ["%-8s %8s %8s %8s %10s %6s" % ("detector", "interval", "bits", "errors", "BER", "nosync")]
        for r in self.rows:
            lines.append("%-8s %6dms %8d %8d %10.6f %6d" % (
                r.detector, r.interval_ms, r.bits, r.errors, r.ber, r.sync_failures))
        return "\n".join(lines)


def _detector_for(detectors, interval_ms):
    if isinstance(detectors, dict):
        return detectors[interval_ms]
    return detectors


def audit_leakage(detector, records):
    trained_on = set(getattr(detector, "train_indices", ()) or ())
    leaked = sorted(trained_on & {r.index for r in records})
    if leaked:
        raise DataLeakage("detector %s was trained on test records %s" % (detector.name, leaked))
    logger.info("Leakage audit passed for %s (%d training records, %d test records)",
                detector.name, len(trained_on), len(records))


def evaluate(detectors, records, receiver, name=None, progress=True):
    """Full receiver chain per record; a record the receiver cannot sync scores all bits as errors.

    `detectors` is one detector or a dict interval_ms -> detector.
    """
    report = EvalReport()
    rows = OrderedDict()
    audited = set()
    logger.info("***** Running Evaluation *****")
    logger.info("  Num records = %d", len(records))
    for record in tqdm(records, desc="Evaluating", bar_format="{l_bar}{r_bar}",
                       dynamic_ncols=True, disable=not progress):
        interval_ms = receiver.interval_ms(record)
        detector = _detector_for(detectors, interval_ms)
        label = name or detector.name
        if id(detector) not in audited:
            audit_leakage(detector, records)
            audited.add(id(detector))
        row = rows.setdefault(interval_ms, EvalRow(label, interval_ms))

        truth = np.asarray(record.bits, dtype=np.int64)
        row.bits += truth.size
        fvs = receiver.try_features(record)
        if fvs is None:
            row.errors += truth.size
            row.sync_failures += 1
            report.decisions[(label, record.index)] = None
            continue
        decided = np.asarray(detector.decode(fvs), dtype=np.int64)
        row.errors += int((decided != truth).sum())
        report.decisions[(label, record.index)] = decided

    report.rows = [rows[k] for k in sorted(rows)]
    for r in report.rows:
        logger.info("%s @ %d ms: BER %.6f (%d/%d, %d sync failures)",
                    r.detector, r.interval_ms, r.ber, r.errors, r.bits, r.sync_failures)
    return report


def eye_diagram_export(records, interval_ms, receiver):
    """(diff_index, diff_value, bit) rows, one per symbol and rate-of-change index."""
    rows = []
    for record in records:
        if receiver.interval_ms(record) != interval_ms:
            continue
        fvs = receiver.try_features(record)
        if fvs is None:
            continue
        for fv, bit in zip(fvs, record.bits):
            for i, value in enumerate(fv.diffs):
                rows.append((i, float(value), int(bit)))
    return pd.DataFrame(rows, columns=EYE_COLUMNS)


def eye_separation(eye, diff_index=6):
    """Gap between the bit-1 and bit-0 medians at one rate-of-change index."""
    at = eye[eye["diff_index"] == diff_index]
    return float(at[at["bit"] == 1]["diff_value"].median() - at[at["bit"] == 0]["diff_value"].median())


def eye_opening(eye, diff_index=6, quantile=0.05):
    """Gap between the low tail of bit 1 and the high tail of bit 0; negative when the eye is closed."""
    at = eye[eye["diff_index"] == diff_index]
    ones = at[at["bit"] == 1]["diff_value"]
    zeros = at[at["bit"] == 0]["diff_value"]
    return float(ones.quantile(quantile) - zeros.quantile(1.0 - quantile))


def write_report_csv(path, report, provenance):
    write_csv(path, report.to_frame(), provenance)


def write_eye_csv(path, eye, provenance):
    write_csv(path, eye, provenance)
