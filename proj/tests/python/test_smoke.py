"""End-to-end smoke tests for the Python bindings."""

import math

import pytest

import pathwatch as pw


@pytest.fixture(scope="module")
def small_data():
    data, truth = pw.synth_generate(n_paths=24, obs_per_path=16, change_rate=0.08, seed=3)
    return data, truth


def test_synth_and_ingest_round_trip(tmp_path, small_data):
    data, truth = small_data
    assert len(data) == 24 * 16
    assert data.labeled
    path = tmp_path / "data.csv"
    pw.write_csv(data, str(path))
    back = pw.parse_csv(str(path))
    assert len(back) == len(data)
    assert back.labels() == data.labels()


def test_class_distribution(small_data):
    data, _ = small_data
    report = pw.class_distribution(data)
    assert report.negatives + report.positives == len(data)
    assert not report.single_class
    assert report.imbalance_ratio > 1


def test_features_to_numpy(small_data):
    data, _ = small_data
    matrix, tables = pw.build_features(data)
    array = matrix.to_numpy()
    assert array.shape == (len(data), len(matrix.schema))
    assert "rtt_mean" in matrix.schema
    assert all(math.isfinite(v) for v in array.ravel())


def test_gbdt_fit_predict(small_data):
    data, _ = small_data
    matrix, _ = pw.build_features(data)
    params = pw.gbdt_params(n_estimators=30, max_leaves=15)
    model = pw.fit_gbdt(matrix, matrix.labels, params)
    probs = pw.predict_proba(model, matrix)
    assert len(probs) == len(data)
    assert all(0.0 < p < 1.0 for p in probs)
    restored = pw.deserialize_model(pw.serialize_model(model))
    assert pw.predict_proba(restored, matrix) == probs


def test_stacked_pipeline(small_data):
    data, _ = small_data
    train, test = pw.split(data, 0.7, seed=1)
    model = pw.train_stacked(train, seed=1, folds=5, base_trees=30, meta_trees=30)
    assert 0.0 <= model.threshold <= 1.0
    prediction = pw.predict_stacked(model, test)
    assert len(prediction.probabilities) == len(test)
    metrics = pw.classification_metrics(prediction.decisions, test.labels())
    assert 0.0 <= metrics["f1"] <= 1.0
    restored = pw.deserialize_stacked(pw.serialize_stacked(model))
    again = pw.predict_stacked(restored, test)
    assert again.probabilities == prediction.probabilities


def test_threshold_scan_example():
    tau, f1 = pw.threshold_scan([0.1, 0.4, 0.35, 0.8], [0, 1, 0, 1])
    assert f1 == pytest.approx(1.0)
    assert tau == pytest.approx(0.351)


def test_wilcoxon_exact_value():
    stat, p = pw.wilcoxon_signed_rank([1, 2, 3, 4, 5], [0.5, 1, 2, 3.5, 4.1])
    assert stat == 0.0
    assert p == pytest.approx(0.0625)


def test_tpe_quadratic():
    space = pw.meta_search_space()
    assert len(space.params) == 8
    assert space.contains([200, 0.0409, 10, 3, 0.6687, 0.7547, 0.5019, 0.1471])

    best, value = pw.optimize(lambda p: -(p[1] - 0.02) ** 2, space, 40, seed=0)
    assert space.contains(best)
    assert value <= 0.0
