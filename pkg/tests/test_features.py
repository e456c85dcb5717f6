import numpy as np
import pytest

from utils.errors import WindowTooShort
from utils.features import (N_BINS, RNN_COLUMNS, SVM_COLUMNS, bin_features, feature_frame, feature_matrix,
                            rnn_features, svm_features)


def test_bins_with_remainder_in_last_bin():
    fv = bin_features(np.arange(50, dtype=float))
    np.testing.assert_allclose(fv.bin_means[:7], 6 * np.arange(7) + 2.5)
    assert fv.bin_means[7] == pytest.approx(45.5)
    np.testing.assert_allclose(fv.diffs, [6, 6, 6, 6, 6, 6, 7])


def test_summary_statistics_use_population_variance():
    fv = bin_features(np.arange(50, dtype=float))
    assert fv.bin_mean_stat == pytest.approx((fv.bin_means.mean(), np.var(fv.bin_means)))
    assert fv.diff_stat[0] == pytest.approx(43.0 / 7)
    assert fv.diff_stat[1] == pytest.approx(np.var([6, 6, 6, 6, 6, 6, 7]))


def test_minimum_window():
    fv = bin_features(np.arange(N_BINS, dtype=float))
    np.testing.assert_allclose(fv.bin_means, np.arange(N_BINS))
    with pytest.raises(WindowTooShort):
        bin_features(np.arange(N_BINS - 1, dtype=float))


def test_constant_window_has_zero_slopes():
    fv = bin_features(np.full(67, 7.0))
    assert np.all(fv.diffs == 0)
    assert fv.bin_mean_stat == (7.0, 0.0)


def test_feature_layouts():
    fv = bin_features(np.linspace(7.0, 5.0, 76))
    svm = svm_features(fv)
    rnn = rnn_features(fv)
    assert svm.shape == (19,) and len(SVM_COLUMNS) == 19
    assert rnn.shape == (15,) and len(RNN_COLUMNS) == 15
    np.testing.assert_allclose(svm[:8], fv.bin_means)
    np.testing.assert_allclose(svm[10:17], fv.diffs)
    np.testing.assert_allclose(rnn, np.concatenate([fv.bin_means, fv.diffs]))
    assert np.all(fv.diffs < 0)


def test_feature_matrix_and_frame():
    fvs = [bin_features(np.random.default_rng(i).normal(7, 0.1, 50)) for i in range(4)]
    assert feature_matrix(fvs, "svm").shape == (4, 19)
    assert feature_matrix(fvs, "rnn").shape == (4, 15)
    assert feature_matrix([], "rnn").shape == (0, 15)
    frame = feature_frame(fvs, [0, 1, 1, 0])
    assert list(frame.columns) == SVM_COLUMNS + ["bit"]
    assert frame["bit"].tolist() == [0, 1, 1, 0]


def test_ramp_of_sixteen_samples():
    fv = bin_features(np.arange(16, dtype=float))
    np.testing.assert_allclose(fv.bin_means, [0.5, 2.5, 4.5, 6.5, 8.5, 10.5, 12.5, 14.5])
    np.testing.assert_allclose(fv.diffs, np.full(7, 2.0))


def test_random_window_matches_explicit_slices():
    x = np.random.default_rng(3).normal(7.0, 0.5, 50)
    slices = [x[6 * i:6 * i + 6] for i in range(7)] + [x[42:]]
    fv = bin_features(x)
    np.testing.assert_allclose(fv.bin_means, [s.mean() for s in slices], rtol=0, atol=1e-12)


@pytest.mark.parametrize("length", [50, 67, 76, 100])
def test_offset_and_scale_equivariance(length):
    x = np.random.default_rng(length).normal(7.0, 0.3, length)
    fv = bin_features(x)
    shifted = bin_features(x + 1.25)
    np.testing.assert_allclose(shifted.bin_means, fv.bin_means + 1.25, rtol=0, atol=1e-12)
    np.testing.assert_allclose(shifted.diffs, fv.diffs, rtol=0, atol=1e-12)
    assert shifted.bin_mean_stat[1] == pytest.approx(fv.bin_mean_stat[1], abs=1e-12)

    scaled = bin_features(-2.0 * x)
    np.testing.assert_allclose(scaled.bin_means, -2.0 * fv.bin_means, rtol=1e-12)
    np.testing.assert_allclose(scaled.diffs, -2.0 * fv.diffs, rtol=1e-9, atol=1e-12)
    assert scaled.diff_stat[1] == pytest.approx(4.0 * fv.diff_stat[1], rel=1e-9)
