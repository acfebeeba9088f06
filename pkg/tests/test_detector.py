import warnings

import numpy as np
import pytest

from wafergpt.data import normalize
from wafergpt.detector import (
    AnomalyScore, Threshold, classify, fit_threshold_eer, fit_threshold_quantile,
    fit_threshold_three_sigma, read_scores_csv, score_dataset, score_sequence, write_scores_csv,
)
from wafergpt.errors import DataError, DegenerateSpread, ShapeMismatch
from wafergpt.model import ModelConfig, init_params


def test_three_sigma_degenerate():
    with pytest.warns(DegenerateSpread):
        tau = fit_threshold_three_sigma([2.0, 2.0, 2.0])
    assert tau.value == 2.0 and tau.degenerate


def test_three_sigma_arithmetic():
    # mean 2.0, sample std 0.5
    vals = [1.5, 2.0, 2.5]
    assert np.std(vals, ddof=1) == 0.5
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tau = fit_threshold_three_sigma(vals)
    assert tau.value == pytest.approx(3.5, abs=1e-12)
    assert tau.method == "three_sigma" and not tau.degenerate


def test_three_sigma_permutation_invariant(rng):
    x = rng.normal(size=50) * 1e3
    assert fit_threshold_three_sigma(x).value == fit_threshold_three_sigma(x[::-1]).value
    with pytest.raises(DataError):
        fit_threshold_three_sigma([1.0])


def test_other_thresholds():
    assert fit_threshold_quantile([1.0, 2.0, 3.0], 0.5).value == 2.0
    t = fit_threshold_eer([0.1, 0.4, 0.35, 0.8], ["normal", "normal", "abnormal", "abnormal"])
    assert t.method == "eer"
    with pytest.raises(ValueError):
        Threshold(float("inf"), "three_sigma")


def test_classify_boundaries():
    assert classify(1.0, 2.0) == "normal"
    assert classify(2.0, 2.0) == "abnormal"
    assert classify(AnomalyScore("a", np.zeros(1), 1e6), Threshold(1e300, "quantile")) == "normal"


def test_score_sequence_repeatable(rng):
    cfg = ModelConfig(seq_len=10, n_layers=1)
    params = init_params(cfg)
    x = rng.random(10)
    a, b = score_sequence(params, cfg, x, "w"), score_sequence(params, cfg, x, "w")
    assert a.total == b.total and np.array_equal(a.per_timestamp, b.per_timestamp)
    assert a.per_timestamp.shape == (9,) and a.total == pytest.approx(a.per_timestamp.sum(), abs=0)
    with pytest.raises(ShapeMismatch):
        score_sequence(params, cfg, rng.random(11))


def test_scores_csv_round_trip(tmp_path, rng):
    scores = [AnomalyScore(f"id{i}", rng.random(5), float(rng.random() * 100), lab)
              for i, lab in enumerate(["normal", "abnormal", None])]
    p = tmp_path / "s.csv"
    write_scores_csv(scores, p)
    back = read_scores_csv(p)
    for a, b in zip(scores, back):
        assert (a.id, a.label, a.total) == (b.id, b.label, b.total)
        assert np.array_equal(a.per_timestamp, b.per_timestamp)
    assert p.read_text().splitlines()[0] == "id,label,total,l_t_0,l_t_1,l_t_2,l_t_3,l_t_4"


def test_cvd_training_totals_below_faults(cvd_runs):
    rep, res = cvd_runs(0)
    abnormal = [s.total for s in res.test_scores if s.label == "abnormal"]
    assert res.train_totals.max() < min(abnormal)
    assert all(s.total > res.three_sigma.value for s in res.test_scores if s.label == "abnormal")


def test_peripheral_point_peak(cvd_runs):
    rep, res = cvd_runs(0)
    entry = next(f for f in rep.manifest["faults"] if f["kind"] == "PeripheralPoint")
    seq = next(s for s in rep.test if s.id == entry["id"])
    score = score_sequence(res.params, res.model_config, normalize(seq, res.normalization))
    # per_timestamp[t] scores the prediction of value t + 1
    peak = int(np.argmax(score.per_timestamp)) + 1
    assert abs(peak - entry["start"]) <= 1


def test_score_dataset_order(cvd_runs):
    rep, res = cvd_runs(0)
    again = score_dataset(res.params, res.model_config, rep.test, res.normalization)
    assert [s.id for s in again] == rep.test.ids
    assert [s.total for s in again] == [s.total for s in res.test_scores]
