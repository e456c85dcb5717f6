import numpy as np
import pytest

from models.configs import get_testing
from models.detectors import (SlopeDetector, SvmDetector, load_detector, load_detectors, model_path,
                              save_detector, train_detectors)
from utils.data_utils import get_loader, sequence_dataset, symbol_dataset
from utils.errors import InvalidConfig, ModelNotFound


@pytest.fixture(scope="module")
def train_records(small_records):
    return [r for r in small_records if r.split == "train"]


def test_loader_and_matrices(train_records, receiver):
    pairs = get_loader(train_records, receiver)
    X, y = symbol_dataset(pairs, "svm")
    assert X.shape == (24 * len(pairs), 19)
    assert y.shape == (24 * len(pairs),)
    sequences = sequence_dataset(pairs, "rnn", sequence_length=10)
    assert [len(s[1]) for s in sequences[:3]] == [10, 10, 4]
    assert sequences[0][0].shape == (10, 15)


@pytest.mark.parametrize("name", ["slope", "svm"])
def test_detectors_roundtrip_through_model_files(name, train_records, small_records, receiver, tmp_path):
    detectors, log = train_detectors(name, train_records, receiver, get_testing(), progress=False)
    assert sorted(detectors) == [250, 334, 380, 500]
    assert len(log) >= 4
    for ms, detector in detectors.items():
        assert set(detector.train_indices) <= {r.index for r in train_records}
        save_detector(str(tmp_path), detector, {"config_digest": "abc", "master_seed": 3})
    restored = load_detectors(str(tmp_path), name, detectors)

    for record in small_records:
        fvs = receiver.try_features(record)
        if fvs is None:
            continue
        ms = receiver.interval_ms(record)
        assert np.array_equal(restored[ms].decode(fvs), detectors[ms].decode(fvs))


def test_rnn_detectors_train(train_records, receiver, tmp_path):
    config = get_testing()
    detectors, log = train_detectors("rnn", train_records, receiver, config,
                                     log_dir=str(tmp_path / "logs"), progress=False)
    assert sorted(detectors) == [250, 334, 380, 500]
    assert list(log.columns) == ["interval_ms", "epoch", "train_loss", "val_loss"]
    assert len(log) == 4 * config.rnn.epochs
    detector = detectors[250]
    assert detector.model.state_dim == config.rnn.state_dim
    save_detector(str(tmp_path), detector, {"config_digest": "abc", "master_seed": 3})
    assert load_detector(str(tmp_path), "rnn", 250).sequence_length == config.rnn.sequence_length


def test_svm_tuning_is_logged(small_records, receiver):
    config = get_testing()
    config.svm.c_grid = (0.1, 1.0)
    detectors, log = train_detectors("svm", list(small_records), receiver, config, progress=False)
    assert set(log["c_reg"]) <= {0.1, 1.0}
    assert log.groupby("interval_ms")["selected"].sum().tolist() == [1] * len(detectors)
    for ms, rows in log.groupby("interval_ms"):
        chosen = rows[rows["selected"]].iloc[0]
        assert detectors[ms].model.c_reg == chosen["c_reg"]


def test_missing_model(tmp_path):
    with pytest.raises(ModelNotFound) as e:
        load_detector(str(tmp_path), "svm", 250)
    assert e.value.path == model_path(str(tmp_path), "svm", 250)


def test_unknown_detector(train_records, receiver):
    with pytest.raises(InvalidConfig):
        train_detectors("mlse", train_records, receiver, get_testing())


def test_payload_fields():
    from models.slope import SlopeModel
    payload = SlopeDetector(SlopeModel(6, 0.25, 3), 380, [4, 5]).to_payload()
    assert payload == {"detector": "slope", "interval_ms": 380, "train_indices": [4, 5],
                       "diff_index": 6, "threshold": 0.25, "training_errors": 3}
    assert SlopeDetector.from_payload(payload).model == SlopeModel(6, 0.25, 3)
    assert SvmDetector.name == "svm"
