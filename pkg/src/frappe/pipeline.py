"""Rank estimation modes.

``estimate_rank`` is the self-supervised path: synthesize tensors matched to
the input's shape and sparsity, train a disposable boosted-tree regressor on
them at evaluation time, predict once, and report the prediction together
with grouped split-count importances. ``train_global`` / ``predict_with_model``
is the conventional path: one pre-trained model reused across inputs.

Neither path ever computes a CPD.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gbdt
from .features import FeatureConfig, FeatureVector, extract_features, feature_groups, feature_names
from .synth import LabeledTensor, gen_tensor, match_recipes
from .tensor import Tensor


@dataclass(frozen=True)
class EstimateOptions:
    max_rank: int
    n_samples: int = 200
    noise_range: tuple[float, float] = (0.02, 0.10)
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    gbdt_params: gbdt.GbdtParams = field(default_factory=gbdt.GbdtParams)
    seed: int = 0

    def __post_init__(self):
        if self.max_rank < 1:
            raise ValueError("max_rank must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        lo, hi = self.noise_range
        if not 0 <= lo <= hi < 1:
            raise ValueError(f"bad noise range {self.noise_range}")


@dataclass(frozen=True)
class RankEstimate:
    raw_prediction: float
    rank: int
    max_rank: int
    importances: dict[str, int]
    features: FeatureVector
    timings: dict[str, float]
    options: EstimateOptions | None = None

    def __post_init__(self):
        if not 1 <= self.rank <= self.max_rank:
            raise ValueError("rank outside [1, max_rank]")


def round_half_away_from_zero(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def clamp_rank(raw: float, max_rank: int) -> int:
    return min(max(round_half_away_from_zero(raw), 1), max_rank)


def _pmap(fn, items, n_threads):
    if n_threads is None:
        n_threads = os.cpu_count() or 1
    if n_threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(fn, items))


def estimate_rank(t: Tensor, opts: EstimateOptions, n_threads: int | None = None) -> RankEstimate:
    """Self-supervised estimate: train on matched synthetic tensors, predict once.

    Deterministic given opts.seed; the per-input model is discarded after the
    single prediction, surviving only as grouped split-count importances.
    """
    cfg = opts.feature_config
    recipes = match_recipes(t, opts.max_rank, opts.n_samples, opts.noise_range, seed=opts.seed)

    t0 = time.perf_counter()
    labeled = _pmap(gen_tensor, recipes, n_threads)
    t1 = time.perf_counter()
    feats = _pmap(lambda lt: extract_features(lt.tensor, cfg), labeled, n_threads)
    input_features = extract_features(t, cfg)
    t2 = time.perf_counter()

    X = np.vstack([fv.values for fv in feats])
    y = np.array([lt.true_rank for lt in labeled], dtype=np.float64)
    model = gbdt.fit(X, y, opts.gbdt_params, feature_names=input_features.names)
    t3 = time.perf_counter()
    raw = model.predict(input_features.values)
    t4 = time.perf_counter()

    _, grouped = gbdt.importances(model, feature_groups(t.order, cfg))
    return RankEstimate(
        raw_prediction=raw,
        rank=clamp_rank(raw, opts.max_rank),
        max_rank=opts.max_rank,
        importances=grouped,
        features=input_features,
        timings={
            "generate_ms": (t1 - t0) * 1e3,
            "extract_ms": (t2 - t1) * 1e3,
            "train_ms": (t3 - t2) * 1e3,
            "predict_ms": (t4 - t3) * 1e3,
        },
        options=opts,
    )


def train_global(
    dataset: list[LabeledTensor],
    params: gbdt.GbdtParams | None = None,
    feature_config: FeatureConfig | None = None,
    n_threads: int | None = None,
) -> gbdt.GbdtModel:
    """Fit one reusable model over a whole labeled corpus."""
    if not dataset:
        raise ValueError("empty dataset")
    orders = {lt.tensor.order for lt in dataset}
    if len(orders) != 1:
        raise ValueError(f"dataset mixes tensor orders {sorted(orders)}")
    cfg = feature_config or FeatureConfig()
    feats = _pmap(lambda lt: extract_features(lt.tensor, cfg), dataset, n_threads)
    X = np.vstack([fv.values for fv in feats])
    y = np.array([lt.true_rank for lt in dataset], dtype=np.float64)
    return gbdt.fit(X, y, params, feature_names=feature_names(orders.pop(), cfg))


def predict_with_model(
    model: gbdt.GbdtModel,
    t: Tensor,
    max_rank: int,
    feature_config: FeatureConfig | None = None,
) -> RankEstimate:
    """Estimate with a pre-trained model; importances come from that model."""
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    cfg = feature_config or FeatureConfig()
    t0 = time.perf_counter()
    fv = extract_features(t, cfg)
    if len(fv) != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, extractor produced {len(fv)}")
    t1 = time.perf_counter()
    raw = model.predict(fv.values)
    t2 = time.perf_counter()
    _, grouped = gbdt.importances(model, feature_groups(t.order, cfg))
    return RankEstimate(
        raw_prediction=raw,
        rank=clamp_rank(raw, max_rank),
        max_rank=max_rank,
        importances=grouped,
        features=fv,
        timings={"extract_ms": (t1 - t0) * 1e3, "predict_ms": (t2 - t1) * 1e3},
        options=None,
    )


def estimate_report(est: RankEstimate, include_timings: bool = True) -> dict:
    """JSON-ready view of a RankEstimate."""
    doc = {
        "rank": est.rank,
        "raw_prediction": est.raw_prediction,
        "max_rank": est.max_rank,
        "n_samples": est.options.n_samples if est.options else None,
        "seed": est.options.seed if est.options else None,
        "importances": [{"group": g, "count": c} for g, c in est.importances.items()],
        "features": est.features.as_dict(),
    }
    if include_timings:
        doc["timings"] = est.timings
    return doc
