import filecmp
import os

import pytest

from main import (CONFIG_FILE, EXIT_CONFIG, EXIT_IO, EXIT_NO_MODEL, EXIT_OK, REPORT_FILE, get_receiver, main)
from models.configs import load_config
from models.detectors import load_detectors
from utils.dataset import MANIFEST, group_by_interval, read_dataset
from utils.evaluation import evaluate
from utils.io_utils import read_csv

CONFIG_TEXT = """
base = testing
dataset.n_experiments = 8
dataset.bits_per_experiment = 24
rnn.epochs = 1
"""


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "run.cfg"
    path.write_text(CONFIG_TEXT)
    return str(path)


@pytest.fixture(scope="module")
def generated(config_file, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("run"))
    assert main(["generate", "--config", config_file, "--out", out, "--no_progress"]) == EXIT_OK
    return out


def run(command, config_file, out, *extra):
    return main([command, "--config", config_file, "--out", out, "--no_progress"] + list(extra))


def test_generate_writes_dataset(generated):
    dataset = os.path.join(generated, "dataset")
    names = sorted(os.listdir(dataset))
    assert len([n for n in names if n.startswith("record_")]) == 8
    assert MANIFEST in names and CONFIG_FILE in names
    with open(os.path.join(dataset, CONFIG_FILE)) as f:
        assert f.readline().startswith("# config_digest=")
    records = read_dataset(dataset)
    assert {r.split for r in records} == {"train", "test"}


def test_generate_is_reproducible(generated, config_file, tmp_path):
    assert run("generate", config_file, str(tmp_path)) == EXIT_OK
    first, second = os.path.join(generated, "dataset"), str(tmp_path / "dataset")
    names = sorted(os.listdir(first))
    match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
    assert mismatch == [] and errors == []


def test_seed_override_changes_data(config_file, tmp_path):
    assert run("generate", config_file, str(tmp_path / "a")) == EXIT_OK
    assert run("generate", config_file, str(tmp_path / "b"), "--seed", "5") == EXIT_OK
    a = read_dataset(str(tmp_path / "a" / "dataset"))
    b = read_dataset(str(tmp_path / "b" / "dataset"))
    assert any(ra.bits.tolist() != rb.bits.tolist() for ra, rb in zip(a, b))


@pytest.mark.parametrize("detector", ["slope", "svm"])
def test_train_and_evaluate(detector, generated, config_file, tmp_path):
    out = str(tmp_path)
    dataset = os.path.join(generated, "dataset")
    assert run("train", config_file, out, "--dataset", dataset, "--detector", detector) == EXIT_OK
    assert run("evaluate", config_file, out, "--dataset", dataset, "--detector", detector) == EXIT_OK

    report, provenance = read_csv(os.path.join(out, REPORT_FILE))
    assert report["interval_ms"].tolist() == [250, 334, 380, 500]
    assert set(report["detector"]) == {detector}
    assert ((report["ber"] >= 0) & (report["ber"] <= 1)).all()
    assert "config_digest" in provenance

    # the CLI report equals a library replay of the saved models
    config = load_config(config_file)
    receiver = get_receiver(config)
    test = [r for r in read_dataset(dataset) if r.split == "test"]
    detectors = load_detectors(out, detector, group_by_interval(test, receiver.frame_template))
    replay = evaluate(detectors, test, receiver, name=detector, progress=False)
    assert report["errors"].tolist() == [row.errors for row in replay.rows]
    assert report["bits"].tolist() == [row.bits for row in replay.rows]


def test_report_is_deterministic(generated, config_file, tmp_path):
    dataset = os.path.join(generated, "dataset")
    reports = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert run("train", config_file, out, "--dataset", dataset, "--detector", "svm") == EXIT_OK
        assert run("evaluate", config_file, out, "--dataset", dataset, "--detector", "svm") == EXIT_OK
        reports.append(os.path.join(out, REPORT_FILE))
    assert filecmp.cmp(reports[0], reports[1], shallow=False)


def test_all_detectors_pipeline(generated, config_file, tmp_path):
    out = str(tmp_path)
    dataset = os.path.join(generated, "dataset")
    assert run("train", config_file, out, "--dataset", dataset) == EXIT_OK
    for name in ("slope", "svm", "rnn"):
        assert os.path.isfile(os.path.join(out, "%s_250ms.model" % name))
        assert os.path.isfile(os.path.join(out, "%s_training_log.csv" % name))
    assert run("evaluate", config_file, out, "--dataset", dataset) == EXIT_OK
    report, _ = read_csv(os.path.join(out, REPORT_FILE))
    assert len(report) == 12
    assert sorted(set(report["detector"])) == ["rnn", "slope", "svm"]


def test_eye_export(generated, config_file, tmp_path):
    out = str(tmp_path)
    dataset = os.path.join(generated, "dataset")
    assert run("eye", config_file, out, "--dataset", dataset) == EXIT_OK

    receiver = get_receiver(load_config(config_file))
    for ms, group in group_by_interval(read_dataset(dataset), receiver.frame_template).items():
        eye, _ = read_csv(os.path.join(out, "eye_%dms.csv" % ms))
        symbols = sum(len(r.bits) for r in group if receiver.try_features(r) is not None)
        assert len(eye) == symbols * 7


def test_evaluate_without_models(generated, config_file, tmp_path):
    dataset = os.path.join(generated, "dataset")
    assert run("evaluate", config_file, str(tmp_path), "--dataset", dataset, "--detector", "svm") == EXIT_NO_MODEL


def test_missing_dataset(config_file, tmp_path):
    missing = str(tmp_path / "nowhere")
    assert run("train", config_file, str(tmp_path), "--dataset", missing, "--detector", "slope") == EXIT_IO


def test_bad_config(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("base = testing\nsvm.sigma = 5.0\n")
    assert main(["generate", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["generate", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_detector_is_a_usage_error(config_file, tmp_path):
    with pytest.raises(SystemExit) as e:
        run("train", config_file, str(tmp_path), "--detector", "mlse")
    assert e.value.code == 2
