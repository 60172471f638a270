import json

import numpy as np
import pytest

from frappe import gbdt
from frappe.gbdt import GbdtModel, GbdtParams, Tree, fit, importances, load, save


def two_clusters():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    return X, y


class TestFitBasics:
    def test_constant_targets(self):
        X = np.random.default_rng(0).random((10, 3))
        y = np.full(10, 4.25)
        model = fit(X, y, GbdtParams(n_trees=5, min_samples_leaf=1))
        for row in X:
            assert model.predict(row) == pytest.approx(4.25, abs=1e-12)
        assert model.feature_split_counts.sum() == 0

    def test_two_cluster_geometric_convergence(self):
        X, y = two_clusters()
        model = fit(X, y, GbdtParams(n_trees=100, learning_rate=0.1, min_samples_leaf=1))
        expected = 10.0 - 5.0 * 0.9**100  # closed-form residual shrinkage
        assert model.predict([1.0]) == pytest.approx(expected, abs=1e-9)
        assert model.predict([0.0]) == pytest.approx(10.0 - expected, abs=1e-9)

    def test_two_cluster_importances_all_on_feature0(self):
        X, y = two_clusters()
        X = np.hstack([X, np.random.default_rng(1).random((4, 5))])
        model = fit(X, y, GbdtParams(n_trees=50, min_samples_leaf=2))
        counts = model.feature_split_counts
        assert counts[0] > 0
        assert counts[1:].sum() == 0

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            fit(np.empty((0, 3)), np.empty(0))
        with pytest.raises(ValueError):
            fit(np.ones((3, 2)), np.ones(4))
        bad = np.ones((3, 2))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            fit(bad, np.ones(3))
        with pytest.raises(ValueError):
            fit(np.ones((3, 2)), np.ones(3), feature_names=("only_one",))

    def test_param_validation(self):
        with pytest.raises(ValueError):
            GbdtParams(n_trees=0)
        with pytest.raises(ValueError):
            GbdtParams(learning_rate=0.0)
        with pytest.raises(ValueError):
            GbdtParams(max_leaves=1)
        with pytest.raises(ValueError):
            GbdtParams(min_samples_leaf=0)


class TestTreeMechanics:
    def test_single_manual_tree(self):
        tree = Tree([0, -1, -1], [0.5, 0.0, 0.0], [1, -1, -1], [2, -1, -1], [0.0, -1.0, 1.0])
        model = GbdtModel(
            base_prediction=0.0,
            trees=[tree],
            params=GbdtParams(learning_rate=1.0),
            n_features=1,
            feature_split_counts=np.array([1]),
        )
        assert model.predict([0.2]) == -1.0
        assert model.predict([0.7]) == 1.0

    def test_zero_tree_model_returns_base(self):
        model = GbdtModel(
            base_prediction=3.5,
            trees=[],
            params=GbdtParams(),
            n_features=4,
            feature_split_counts=np.zeros(4, dtype=np.int64),
        )
        assert model.predict([1.0, 2.0, 3.0, 4.0]) == 3.5

    def test_unused_feature_perturbation(self):
        X, y = two_clusters()
        X = np.hstack([X, np.zeros((4, 3))])
        model = fit(X, y, GbdtParams(n_trees=20, min_samples_leaf=1))
        a = model.predict([1.0, 0.0, 0.0, 0.0])
        b = model.predict([1.0, 123.0, -5.0, 0.25])
        assert a == b

    def test_feature_tie_break_prefers_lowest_index(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
        y = np.array([0.0, 1.0, 0.0, 1.0])
        model = fit(X, y, GbdtParams(n_trees=1, min_samples_leaf=1))
        assert model.feature_split_counts[0] == 1
        assert model.feature_split_counts[1] == 0

    def test_threshold_tie_break_prefers_lowest(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([1.0, 0.0, 1.0])
        model = fit(X, y, GbdtParams(n_trees=1, min_samples_leaf=1, learning_rate=1.0))
        tree = model.trees[0]
        root_thr = tree.threshold[0]
        assert root_thr == 0.5  # the 1.5 split has identical gain

    def test_predict_dimension_mismatch(self):
        X, y = two_clusters()
        model = fit(X, y)
        with pytest.raises(ValueError):
            model.predict([1.0, 2.0])


class TestInvariants:
    def _staged_mse(self, model, X, y):
        lr = model.params.learning_rate
        preds = np.full(len(y), model.base_prediction)
        errs = [np.mean((y - preds) ** 2)]
        for tree in model.trees:
            preds = preds + lr * np.array([tree.predict_one(row) for row in X])
            errs.append(np.mean((y - preds) ** 2))
        return errs

    def test_training_loss_monotone(self):
        rng = np.random.default_rng(2)
        X = rng.random((60, 8))
        y = X[:, 0] * 3 + np.sin(X[:, 1] * 6) + 0.1 * rng.standard_normal(60)
        model = fit(X, y, GbdtParams(n_trees=40))
        errs = self._staged_mse(model, X, y)
        assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))

    def test_exact_interpolation(self):
        rng = np.random.default_rng(3)
        X = rng.integers(0, 100, size=(20, 4)).astype(float)
        while len(np.unique(X, axis=0)) < 20:  # ensure distinct rows
            X = rng.integers(0, 100, size=(20, 4)).astype(float)
        y = rng.integers(-8, 8, size=20).astype(float) * 0.25
        model = fit(X, y, GbdtParams(n_trees=1, learning_rate=1.0, max_leaves=40, min_samples_leaf=1))
        preds = np.array([model.predict(r) for r in X])
        assert np.max(np.abs(preds - y)) < 1e-9

    def test_fit_deterministic(self):
        rng = np.random.default_rng(4)
        X = rng.random((50, 6))
        y = rng.random(50)
        a = fit(X, y, GbdtParams(n_trees=10))
        b = fit(X, y, GbdtParams(n_trees=10))
        probe = rng.random((30, 6))
        assert np.array_equal(a.predict_batch(probe), b.predict_batch(probe))
        assert np.array_equal(a.feature_split_counts, b.feature_split_counts)


class TestImportances:
    def test_zero_tree_counts(self):
        model = GbdtModel(0.0, [], GbdtParams(), 3, np.zeros(3, dtype=np.int64))
        per_feature, grouped = importances(model)
        assert all(v == 0 for v in per_feature.values())
        assert all(v == 0 for v in grouped.values())

    def test_manual_counts(self):
        tree = Tree(
            [0, 0, -1, -1, 7, -1, -1],
            [0.5, 0.25, 0.0, 0.0, 0.75, 0.0, 0.0],
            [1, 2, -1, -1, 5, -1, -1],
            [4, 3, -1, -1, 6, -1, -1],
            [0.0, 0.0, 1.0, 2.0, 0.0, 3.0, 4.0],
        )
        counts = np.zeros(8, dtype=np.int64)
        for f in tree.feature:
            if f >= 0:
                counts[f] += 1
        model = GbdtModel(0.0, [tree], GbdtParams(), 8, counts)
        per_feature, _ = importances(model)
        assert per_feature["x000"] == 2
        assert per_feature["x007"] == 1

    def test_group_sums(self):
        rng = np.random.default_rng(5)
        X = rng.random((40, 6))
        y = X[:, 0] + 2 * X[:, 3] + 0.01 * rng.standard_normal(40)
        model = fit(X, y, GbdtParams(n_trees=15))
        groups = ("a", "a", "a", "b", "b", "c")
        per_feature, grouped = importances(model, groups)
        assert grouped["a"] == sum(model.feature_split_counts[:3])
        assert grouped["b"] == sum(model.feature_split_counts[3:5])
        assert grouped["c"] == model.feature_split_counts[5]
        assert sum(grouped.values()) == model.feature_split_counts.sum()

    def test_split_count_invariant(self):
        rng = np.random.default_rng(6)
        X = rng.random((50, 5))
        y = rng.random(50)
        model = fit(X, y, GbdtParams(n_trees=12))
        total_from_trees = sum(t.n_splits() for t in model.trees)
        assert model.feature_split_counts.sum() == total_from_trees


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        X = rng.random((80, 7))
        y = X @ rng.random(7) + 0.05 * rng.standard_normal(80)
        model = fit(X, y, GbdtParams(n_trees=25), feature_names=[f"f{i}" for i in range(7)])
        path = tmp_path / "model.json"
        save(model, path)
        loaded = load(path)
        probe = rng.random((100, 7))
        assert np.array_equal(model.predict_batch(probe), loaded.predict_batch(probe))
        assert loaded.feature_names == model.feature_names
        assert np.array_equal(loaded.feature_split_counts, model.feature_split_counts)
        assert loaded.params == model.params

    def test_empty_tree_round_trip(self, tmp_path):
        model = GbdtModel(2.125, [], GbdtParams(), 3, np.zeros(3, dtype=np.int64))
        path = tmp_path / "m.json"
        save(model, path)
        assert load(path).predict([0.0, 0.0, 0.0]) == 2.125

    def test_truncated_file(self, tmp_path):
        rng = np.random.default_rng(8)
        model = fit(rng.random((10, 2)), rng.random(10), GbdtParams(n_trees=2))
        path = tmp_path / "m.json"
        save(model, path)
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(ValueError):
            load(path)

    def test_wrong_format_and_version(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"format": "other", "version": 1}))
        with pytest.raises(ValueError, match="not a gbdt"):
            load(path)
        path.write_text(json.dumps({"format": gbdt.MODEL_FORMAT, "version": 99}))
        with pytest.raises(ValueError, match="version"):
            load(path)
