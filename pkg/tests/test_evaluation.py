import numpy as np
import pytest

from models.configs import get_testing
from models.detectors import train_detectors
from models.slope import train_slope
from utils.channel import ChannelConfig, PhTrace
from utils.data_utils import Receiver, get_loader
from utils.dataset import generate_dataset
from utils.errors import DataLeakage
from utils.evaluation import (EYE_COLUMNS, REPORT_COLUMNS, EvalReport, EvalRow, evaluate, eye_diagram_export,
                              eye_opening, eye_separation, write_report_csv)
from utils.io_utils import read_csv


class ReplayDetector(object):
    """Returns the true bits of each record in turn, optionally inverted."""
    name = "replay"

    def __init__(self, records, invert=False, train_indices=()):
        self.queue = [np.asarray(r.bits, dtype=np.int64) for r in records]
        self.invert = invert
        self.train_indices = tuple(train_indices)

    def decode(self, fvs):
        bits = self.queue.pop(0)
        assert len(bits) == len(fvs)
        return 1 - bits if self.invert else bits


def synced(records, receiver):
    return [r for r in records if receiver.try_features(r) is not None]


def test_perfect_detector_has_zero_ber(small_records, receiver):
    records = synced(small_records, receiver)
    report = evaluate(ReplayDetector(records), records, receiver, progress=False)
    assert [r.interval_ms for r in report.rows] == sorted({receiver.interval_ms(r) for r in records})
    assert all(r.ber == 0.0 for r in report.rows)
    assert sum(r.bits for r in report.rows) == 24 * len(records)


def test_inverting_detector_has_unit_ber(small_records, receiver):
    records = synced(small_records, receiver)
    report = evaluate(ReplayDetector(records, invert=True), records, receiver, progress=False)
    assert all(r.ber == 1.0 for r in report.rows)


def test_unsynchronized_record_scores_all_errors(receiver, make_record):
    flat = PhTrace(sample_rate_hz=200.0, samples=np.full(2000, 7.0), seed=0, config_digest="")
    record = make_record(99, n_bits=10, trace=flat)
    report = evaluate(ReplayDetector([]), [record], receiver, progress=False)
    row = report.row("replay", 250)
    assert (row.bits, row.errors, row.sync_failures) == (10, 10, 1)
    assert report.decisions[("replay", 99)] is None


def test_ber_matches_recount(small_records, receiver):
    train = [r for r in small_records if r.split == "train"]
    test = [r for r in small_records if r.split == "test"]
    detectors, _ = train_detectors("slope", train, receiver, get_testing(), progress=False)
    report = evaluate(detectors, test, receiver, name="slope", progress=False)

    errors = bits = 0
    for r in test:
        decided = report.decisions[("slope", r.index)]
        truth = np.asarray(r.bits, dtype=np.int64)
        bits += truth.size
        errors += truth.size if decided is None else int(np.sum(decided != truth))
    assert sum(row.errors for row in report.rows) == errors
    assert sum(row.bits for row in report.rows) == bits
    for row in report.rows:
        assert row.ber == pytest.approx(row.errors / row.bits)


def test_leakage_is_detected(small_records, receiver):
    records = synced(small_records, receiver)
    detector = ReplayDetector(records, train_indices=[records[0].index])
    with pytest.raises(DataLeakage):
        evaluate(detector, records, receiver, progress=False)


def test_eye_export(small_records, receiver):
    record = small_records[0]
    interval_ms = receiver.interval_ms(record)
    eye = eye_diagram_export([record], interval_ms, receiver)
    assert list(eye.columns) == EYE_COLUMNS
    assert len(eye) == 24 * 7
    assert sorted(eye["diff_index"].unique()) == list(range(7))
    assert set(eye["bit"].unique()) <= {0, 1}
    assert len(eye_diagram_export([record], interval_ms + 1, receiver)) == 0
    assert np.isfinite(eye_separation(eye))


def test_report_frame_and_csv(tmp_path):
    report = EvalReport(rows=[EvalRow("slope", 250, bits=100, errors=7), EvalRow("svm", 250, bits=0)])
    frame = report.to_frame()
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame["ber"].tolist() == [0.07, 0.0]
    assert "slope" in report.format_table()

    path = str(tmp_path / "report.csv")
    write_report_csv(path, report, {"config_digest": "abcd", "master_seed": 3})
    loaded, provenance = read_csv(path)
    assert provenance == {"config_digest": "abcd", "master_seed": "3"}
    assert loaded["errors"].tolist() == [7, 0]


def default_channel_records(pause_s, noise_std_ph=None, n=6):
    cfg = ChannelConfig() if noise_std_ph is None else ChannelConfig(noise_std_ph=noise_std_ph)
    return generate_dataset(cfg, master_seed=11, n_experiments=n, pauses_s=(pause_s,),
                            bits_per_experiment=60, progress=False)


@pytest.fixture(scope="module")
def eyes():
    receiver = Receiver(noise_std_ph=ChannelConfig().noise_std_ph)
    return {ms: eye_diagram_export(default_channel_records(pause_s), ms, receiver)
            for ms, pause_s in ((250, 0.220), (500, 0.470))}


def test_acid_falls_at_the_end_of_a_500ms_window(eyes):
    at = eyes[500][eyes[500]["diff_index"] == 6]
    assert (at[at["bit"] == 0]["diff_value"] < 0).mean() >= 0.9
    assert (at[at["bit"] == 1]["diff_value"] > 0).mean() >= 0.9
    assert eye_separation(eyes[500]) > 0


def test_eye_closes_at_the_shortest_interval(eyes):
    assert eye_opening(eyes[500]) > 0
    assert eye_opening(eyes[250]) < eye_opening(eyes[500])


def test_slope_uses_last_rate_of_change_at_500ms():
    records = default_channel_records(0.470, noise_std_ph=0.0)
    pairs = get_loader(records, Receiver())
    assert len(pairs) == len(records)
    model = train_slope([fv for _, fvs in pairs for fv in fvs], np.concatenate([r.bits for r, _ in pairs]))
    assert model.diff_index == 6
    assert model.training_errors == 0
