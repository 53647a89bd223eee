import logging

import numpy as np
import pytest

from maturity.errors import DimensionMismatch, EmptyData, LengthMismatch, SingleClass, TooFewRows
from maturity.forest.ensemble import (
    Forest,
    ForestConfig,
    balanced_class_weights,
    feature_importance,
    fit_forest,
    oob_score,
    predict,
    predict_proba,
)
from maturity.forest.metrics import evaluate
from maturity.forest.tree import DecisionTree, gini
from maturity.forest.validation import cross_validate
from maturity.preprocess.splitting import stratified_split
from maturity.store.artifacts import ArtifactStore


SMALL = ForestConfig(n_trees=25, max_depth=6)


def test_gini():
    assert gini(np.array([5.0, 5.0])) == pytest.approx(0.5)
    assert gini(np.array([4.0, 0.0])) == 0.0
    assert gini(np.zeros(3)) == 0.0


def test_balanced_class_weights():
    y = np.array([0] * 30 + [1] * 10)
    assert balanced_class_weights(y, np.array([0, 1])).tolist() == pytest.approx([40 / 60, 2.0])


def test_balanced_weights_for_forty_twenty():
    y = np.array([2] * 40 + [1] * 20)
    assert balanced_class_weights(y, np.array([1, 2])).tolist() == pytest.approx([1.5, 0.75])
    forest = fit_forest(np.arange(60, dtype=float).reshape(60, 1), y, ForestConfig(n_trees=2), seed=0)
    assert forest.class_weights == pytest.approx([1.5, 0.75])


def test_xor_holdout_accuracy(xor_data):
    X, y = xor_data
    split = stratified_split(y.tolist(), 0.2, seed=42)
    forest = fit_forest(X[split.train_rows], y[split.train_rows], ForestConfig(n_trees=50), seed=42)
    accuracy = np.mean(predict(forest, X[split.test_rows]) == y[split.test_rows])
    assert accuracy >= 0.9


def test_separable_training_accuracy():
    rng = np.random.default_rng(12)
    y = np.array([0] * 25 + [1] * 25)
    X = np.column_stack([y + rng.uniform(-0.3, 0.3, size=50), rng.uniform(size=50)])
    forest = fit_forest(X, y, ForestConfig(n_trees=10, max_features=2), seed=4)
    assert np.array_equal(predict(forest, X), y)


def test_xor_cross_validation_and_importance(xor_data):
    X, y = xor_data
    result = cross_validate(X, y, k=5, config=ForestConfig(n_trees=50), seed=42)
    assert result.mean >= 0.85
    assert len(result.scores) == 5
    assert sum(result.fold_sizes) == 400
    assert not result.degraded

    importance = feature_importance(fit_forest(X, y, ForestConfig(n_trees=50), seed=42))
    assert min(importance[0], importance[1]) > max(importance[2:])


def test_importance_is_a_distribution(xor_data):
    X, y = xor_data
    importance = feature_importance(fit_forest(X, y, SMALL, seed=1))
    assert importance.sum() == pytest.approx(1.0)
    assert np.all(importance >= 0)


def test_importance_of_a_single_splitting_feature():
    y = np.array([0, 1] * 15)
    X = np.column_stack([y.astype(float), np.full(30, 2.0), np.full(30, -1.0)])
    importance = feature_importance(fit_forest(X, y, ForestConfig(n_trees=10, max_features=3), seed=0))
    assert importance.tolist() == pytest.approx([1.0, 0.0, 0.0])


def test_unsplit_forest_spreads_importance_uniformly():
    y = np.array([0, 1] * 10)
    forest = fit_forest(np.ones((20, 3)), y, SMALL, seed=0)
    importance = feature_importance(forest)
    assert importance.tolist() == pytest.approx([1 / 3] * 3)
    assert importance.sum() == pytest.approx(1.0, abs=1e-9)


def test_noise_labels_spread_importance():
    uniform = 1 / 8
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.uniform(size=(150, 8))
        y = rng.integers(0, 2, size=150)
        importance = feature_importance(fit_forest(X, y, ForestConfig(n_trees=15, max_depth=6), seed=seed))
        assert importance.max() <= 3 * uniform


def test_probabilities_are_normalized_and_predictions_match(xor_data):
    X, y = xor_data
    forest = fit_forest(X, y, SMALL, seed=3)
    proba = predict_proba(forest, X[:50])
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert np.array_equal(predict(forest, X[:50]), np.asarray(forest.classes)[np.argmax(proba, axis=1)])


def two_leaf_forest(first, second):
    """Two single-leaf trees voting with the given class totals"""
    trees = [DecisionTree.from_nested({"value": list(votes)}, n_features=1) for votes in (first, second)]
    return Forest(
        hyperparams=ForestConfig(n_trees=2),
        seed=0,
        classes=[1, 2],
        class_weights=[1.0, 1.0],
        medians=[0.0],
        trees=trees,
        oob_indices=[[], []],
    )


def test_tied_vote_goes_to_lower_class():
    forest = two_leaf_forest((1.0, 0.0), (0.0, 1.0))
    assert predict_proba(forest, np.zeros((1, 1))).tolist() == [[0.5, 0.5]]
    assert predict(forest, np.zeros((1, 1))).tolist() == [1]


def test_pure_leaf_forest_is_one_hot():
    forest = two_leaf_forest((0.0, 3.0), (0.0, 1.0))
    assert predict_proba(forest, np.zeros((2, 1))).tolist() == [[0.0, 1.0], [0.0, 1.0]]
    assert predict(forest, np.zeros((1, 1))).tolist() == [2]


def test_trees_respect_max_depth(xor_data):
    X, y = xor_data
    forest = fit_forest(X, y, ForestConfig(n_trees=5, max_depth=3), seed=0)
    assert all(tree.depth() <= 3 for tree in forest.trees)


def test_same_seed_same_forest(xor_data):
    X, y = xor_data
    first = fit_forest(X, y, SMALL, seed=11).to_document()
    assert fit_forest(X, y, SMALL, seed=11).to_document() == first
    assert fit_forest(X, y, SMALL, seed=12).to_document() != first


def test_forest_document_round_trip(tmp_path, xor_data):
    X, y = xor_data
    forest = fit_forest(X, y, SMALL, seed=5, feature_names=[f"f{i}" for i in range(10)])
    store = ArtifactStore(tmp_path)
    store.save_forest(forest)
    restored = store.load_forest()
    assert restored.feature_names == forest.feature_names
    assert np.array_equal(predict_proba(restored, X), predict_proba(forest, X))
    assert np.allclose(feature_importance(restored), feature_importance(forest))


def test_absent_values_use_training_medians(xor_data):
    X, y = xor_data
    forest = fit_forest(X, y, SMALL, seed=2)
    row = X[:1].copy()
    row[0, 4] = np.nan
    filled = X[:1].copy()
    filled[0, 4] = forest.medians[4]
    assert np.array_equal(predict_proba(forest, row), predict_proba(forest, filled))


def test_out_of_bag_accuracy(xor_data):
    X, y = xor_data
    forest = fit_forest(X, y, ForestConfig(n_trees=50), seed=42)
    score = oob_score(forest, X, y)
    assert score is not None and 0.8 <= score <= 1.0
    for rows in forest.oob_indices:
        assert all(0 <= r < 400 for r in rows)


def test_single_class_is_rejected():
    with pytest.raises(SingleClass):
        fit_forest(np.zeros((5, 2)), np.ones(5, dtype=int))


def test_too_little_data():
    with pytest.raises(EmptyData):
        fit_forest(np.zeros((1, 3)), np.array([1]))
    with pytest.raises(EmptyData):
        fit_forest(np.zeros((0, 3)), np.array([], dtype=int))


def test_dimension_mismatches(xor_data):
    X, y = xor_data
    with pytest.raises(DimensionMismatch):
        fit_forest(X, y[:-1])
    with pytest.raises(DimensionMismatch):
        fit_forest(X, y, SMALL, feature_names=["only", "two"])
    forest = fit_forest(X, y, SMALL, seed=0)
    with pytest.raises(DimensionMismatch):
        predict(forest, X[:, :9])


# metrics

def confusion_example():
    """Actual Developing 4 (3 right), Advanced 8 (all right)"""
    y_true = [1] * 4 + [2] * 8
    y_pred = [1, 1, 1, 2] + [2] * 8
    return y_true, y_pred


def test_metrics_worked_example():
    report = evaluate(*confusion_example())
    assert report.confusion.labels == ["Developing", "Advanced"]
    assert report.confusion.counts == [[3, 1], [0, 8]]
    assert report.confusion.dropped == ["Basic"]
    assert report.accuracy == pytest.approx(0.917, abs=5e-4)
    assert report.kappa == pytest.approx(0.80, abs=1e-9)

    developing = report.for_label("Developing")
    advanced = report.for_label("Advanced")
    assert (developing.precision, developing.recall) == pytest.approx((1.0, 0.75))
    assert developing.f1 == pytest.approx(0.857, abs=5e-3)
    assert advanced.precision == pytest.approx(0.889, abs=5e-3)
    assert advanced.f1 == pytest.approx(0.941, abs=5e-3)
    assert report.macro_recall == pytest.approx(0.875)
    assert report.macro_precision == pytest.approx(0.94, abs=5e-3)
    assert report.macro_f1 == pytest.approx(0.90, abs=5e-3)
    assert advanced.recall == pytest.approx(1.0)


def test_metrics_zero_denominator_is_flagged(caplog):
    with caplog.at_level(logging.WARNING):
        report = evaluate([1, 1, 2, 2], [1, 1, 1, 1])
    advanced = report.for_label("Advanced")
    assert advanced.precision == 0.0
    assert advanced.precision_undefined
    assert "zero denominator" in caplog.text


def test_kappa_undefined_for_single_observed_class():
    report = evaluate([2, 2, 2], [2, 2, 2])
    assert report.accuracy == 1.0
    assert report.kappa is None


def test_perfect_agreement():
    report = evaluate([0, 1, 2, 1], [0, 1, 2, 1])
    assert report.accuracy == 1.0
    assert report.kappa == pytest.approx(1.0)


def test_metrics_survive_relabelling():
    y_true, y_pred = confusion_example()
    swap = {1: 2, 2: 1}
    forward = evaluate(y_true, y_pred)
    swapped = evaluate([swap[v] for v in y_true], [swap[v] for v in y_pred])
    assert swapped.accuracy == pytest.approx(forward.accuracy)
    assert swapped.kappa == pytest.approx(forward.kappa)
    assert (swapped.macro_precision, swapped.macro_recall, swapped.macro_f1) == pytest.approx(
        (forward.macro_precision, forward.macro_recall, forward.macro_f1)
    )
    assert swapped.for_label("Advanced").recall == pytest.approx(forward.for_label("Developing").recall)


def test_metrics_length_mismatch():
    with pytest.raises(LengthMismatch):
        evaluate([1, 2], [1])
    with pytest.raises(LengthMismatch):
        evaluate([], [])


# cross-validation

def test_cross_validation_is_deterministic(xor_data):
    X, y = xor_data
    first = cross_validate(X[:100], y[:100], k=3, config=SMALL, seed=9)
    assert cross_validate(X[:100], y[:100], k=3, config=SMALL, seed=9) == first


def test_small_class_degrades_stratification(caplog, xor_data):
    X, _ = xor_data
    X = X[:40]
    y = np.array([0] * 37 + [1] * 3)
    with caplog.at_level(logging.WARNING):
        result = cross_validate(X, y, k=5, config=SMALL, seed=0)
    assert result.degraded
    assert "degraded" in caplog.text


def test_cross_validation_needs_enough_rows():
    with pytest.raises(TooFewRows):
        cross_validate(np.zeros((3, 2)), np.array([0, 1, 0]), k=5)
    with pytest.raises(TooFewRows):
        cross_validate(np.zeros((10, 2)), np.array([0, 1] * 5), k=1)


def test_sixty_rows_make_five_folds_of_twelve(xor_data):
    X, _ = xor_data
    y = np.array([0, 1] * 30)
    result = cross_validate(X[:60], y, k=5, config=SMALL, seed=42)
    assert result.fold_sizes == [12] * 5
    assert result.skipped == []


def test_separable_data_cross_validates_perfectly():
    y = np.array([0] * 30 + [1] * 30)
    X = (y + np.linspace(0.0, 0.4, 60)).reshape(60, 1)
    result = cross_validate(X, y, k=5, config=ForestConfig(n_trees=10), seed=3)
    assert result.mean == 1.0
    assert result.std == 0.0


def test_fold_without_second_class_is_skipped(caplog):
    X = np.arange(10, dtype=float).reshape(10, 1)
    y = np.array([0] * 9 + [1])
    with caplog.at_level(logging.WARNING):
        result = cross_validate(X, y, k=5, config=SMALL, seed=1)
    assert result.degraded
    assert len(result.skipped) == 1
    assert len(result.scores) == 4
    assert "fold skipped" in caplog.text
