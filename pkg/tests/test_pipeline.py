import numpy as np
import pytest

from frappe import cpd, gbdt
from frappe.features import FeatureConfig, extract_features
from frappe.pipeline import (
    EstimateOptions,
    clamp_rank,
    estimate_rank,
    estimate_report,
    predict_with_model,
    round_half_away_from_zero,
    train_global,
)
from frappe.synth import SynthRecipe, gen_dataset, gen_tensor
from frappe.tensor import DenseTensor


def small_input(rank=2, seed=0, shape=(12, 12, 12)):
    return gen_tensor(SynthRecipe(klass="dense", shape=shape, rank=rank, noise_alpha=0.05, seed=seed)).tensor


class TestRounding:
    def test_half_away_from_zero(self):
        assert round_half_away_from_zero(6.4) == 6
        assert round_half_away_from_zero(6.5) == 7
        assert round_half_away_from_zero(0.2) == 0
        assert round_half_away_from_zero(-1.5) == -2
        assert round_half_away_from_zero(-0.4) == 0

    def test_clamp(self):
        assert clamp_rank(6.4, 10) == 6
        assert clamp_rank(0.2, 10) == 1
        assert clamp_rank(5.7, 2) == 2
        assert clamp_rank(-3.0, 8) == 1


class TestOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            EstimateOptions(max_rank=0)
        with pytest.raises(ValueError):
            EstimateOptions(max_rank=3, n_samples=0)
        with pytest.raises(ValueError):
            EstimateOptions(max_rank=3, noise_range=(0.5, 0.2))


class TestEstimateRank:
    def test_basic_run_and_report_shape(self):
        t = small_input()
        opts = EstimateOptions(max_rank=4, n_samples=30, seed=7)
        est = estimate_rank(t, opts)
        assert 1 <= est.rank <= 4
        assert est.max_rank == 4
        assert set(est.timings) == {"generate_ms", "extract_ms", "train_ms", "predict_ms"}
        assert sum(est.importances.values()) > 0
        assert len(est.features) == 112

    def test_deterministic_given_seed(self):
        t = small_input(seed=1)
        opts = EstimateOptions(max_rank=5, n_samples=25, seed=3)
        a = estimate_rank(t, opts)
        b = estimate_rank(t, opts)
        assert a.rank == b.rank
        assert a.raw_prediction == b.raw_prediction
        assert a.importances == b.importances
        assert np.array_equal(a.features.values, b.features.values)

    def test_thread_count_does_not_change_result(self):
        t = small_input(seed=2)
        opts = EstimateOptions(max_rank=4, n_samples=16, seed=5)
        a = estimate_rank(t, opts, n_threads=1)
        b = estimate_rank(t, opts, n_threads=3)
        assert a.raw_prediction == b.raw_prediction
        assert a.importances == b.importances

    def test_never_calls_cpd(self):
        cpd.reset_als_invocations()
        t = small_input(seed=3)
        estimate_rank(t, EstimateOptions(max_rank=4, n_samples=12, seed=0))
        assert cpd.als_invocations() == 0

    def test_zero_tensor_rejected(self):
        with pytest.raises(ValueError):
            estimate_rank(DenseTensor(np.zeros((5, 5, 5))), EstimateOptions(max_rank=3))

    def test_report_document(self):
        t = small_input(seed=4)
        opts = EstimateOptions(max_rank=4, n_samples=12, seed=9)
        est = estimate_rank(t, opts)
        doc = estimate_report(est)
        assert doc["rank"] == est.rank
        assert doc["max_rank"] == 4
        assert doc["n_samples"] == 12
        assert doc["seed"] == 9
        assert {"group", "count"} == set(doc["importances"][0])
        assert doc["features"]["f001_dim1"] == 12.0
        assert "timings" in doc
        assert "timings" not in estimate_report(est, include_timings=False)


class TestGlobalMode:
    def test_single_tensor_dataset_predicts_its_rank(self):
        lt = gen_tensor(SynthRecipe(klass="dense", shape=(8, 8, 8), rank=4, noise_alpha=0.0, seed=5))
        model = train_global([lt])
        est = predict_with_model(model, lt.tensor, max_rank=10)
        assert est.raw_prediction == pytest.approx(4.0, abs=1e-12)
        assert est.rank == 4

    def test_training_mse_bounded_by_rank_variance(self):
        dataset = gen_dataset((4, 4, 4), dims=(8, 12), rank_range=(1, 6), seed=11)
        model = train_global(dataset)
        X = np.vstack([extract_features(lt.tensor).values for lt in dataset])
        y = np.array([lt.true_rank for lt in dataset], dtype=float)
        preds = model.predict_batch(X)
        assert np.mean((preds - y) ** 2) <= np.var(y) + 1e-12

    def test_out_of_distribution_still_predicts(self):
        dataset = gen_dataset((2, 2, 2), dims=(8, 8, 8), rank_range=(1, 3), seed=12)
        model = train_global(dataset)
        far = small_input(rank=3, seed=6, shape=(25, 30, 35))
        est = predict_with_model(model, far, max_rank=6)
        assert 1 <= est.rank <= 6

    def test_rejects_empty_and_mixed_orders(self):
        with pytest.raises(ValueError):
            train_global([])
        three = gen_tensor(SynthRecipe(klass="dense", shape=(6, 6, 6), rank=2, noise_alpha=0.0, seed=7))
        four = gen_tensor(SynthRecipe(klass="dense", shape=(5, 5, 5, 5), rank=2, noise_alpha=0.0, seed=8))
        with pytest.raises(ValueError):
            train_global([three, four])

    def test_zero_tree_model_constant_rank(self):
        model = gbdt.GbdtModel(3.0, [], gbdt.GbdtParams(), 112, np.zeros(112, dtype=np.int64))
        t = small_input(seed=9)
        est = predict_with_model(model, t, max_rank=8)
        assert est.rank == 3
        assert est.raw_prediction == 3.0

    def test_clamp_applies(self):
        model = gbdt.GbdtModel(5.7, [], gbdt.GbdtParams(), 112, np.zeros(112, dtype=np.int64))
        est = predict_with_model(model, small_input(seed=10), max_rank=2)
        assert est.rank == 2

    def test_save_load_round_trip_prediction(self, tmp_path):
        lt = gen_tensor(SynthRecipe(klass="dense", shape=(9, 9, 9), rank=3, noise_alpha=0.02, seed=13))
        model = train_global([lt])
        path = tmp_path / "global.json"
        gbdt.save(model, path)
        loaded = gbdt.load(path)
        a = predict_with_model(model, lt.tensor, max_rank=6)
        b = predict_with_model(loaded, lt.tensor, max_rank=6)
        assert a.raw_prediction == b.raw_prediction
        assert a.rank == b.rank

    def test_feature_dimension_mismatch(self):
        model = gbdt.GbdtModel(1.0, [], gbdt.GbdtParams(), 112, np.zeros(112, dtype=np.int64))
        four = gen_tensor(SynthRecipe(klass="dense", shape=(4, 4, 4, 4), rank=1, noise_alpha=0.0, seed=14))
        with pytest.raises(ValueError, match="features"):
            predict_with_model(model, four.tensor, max_rank=3)


class TestSelfConsistencySmall:
    def test_noiseless_rank5_lands_in_band(self):
        # the spec's pilot example: dense 30^3, true rank 5, max_rank 10
        lt = gen_tensor(SynthRecipe(klass="dense", shape=(30, 30, 30), rank=5, noise_alpha=0.0, seed=42))
        est = estimate_rank(lt.tensor, EstimateOptions(max_rank=10, n_samples=200, seed=42))
        assert 3 <= est.rank <= 7
