"""Benchmark harness: run an estimator over a dataset manifest and score it."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
from scipy import stats

from . import gbdt
from .pipeline import EstimateOptions, clamp_rank, estimate_rank, predict_with_model
from .tensor_io import parse_tensor

REPORT_FORMAT = "frappe-bench-report"
REPORT_VERSION = 1


def mape(pred, true) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    return float(np.mean(np.abs(pred - true) / true) * 100.0)


def mae(pred, true) -> float:
    return float(np.mean(np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(true, dtype=np.float64))))


def mse(pred, true) -> float:
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(true, dtype=np.float64)
    return float(np.mean(diff**2))


def spearman(pred, true) -> float | None:
    """Spearman rank correlation; None when undefined (constant input)."""
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if len(pred) < 2 or np.all(pred == pred[0]) or np.all(true == true[0]):
        return None
    rho = stats.spearmanr(pred, true).statistic
    return None if np.isnan(rho) else float(rho)


def load_manifest(path) -> list[dict]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list) or not entries:
        raise ValueError(f"{path}: manifest must be a non-empty JSON list")
    for i, e in enumerate(entries):
        missing = {"path", "true_rank", "class", "alpha", "seed"} - set(e)
        if missing:
            raise ValueError(f"{path}: entry {i} missing fields {sorted(missing)}")
    return entries


def run_bench(
    manifest_path,
    mode: str,
    model_path=None,
    n_samples: int = 200,
    seed: int = 0,
    n_threads: int | None = None,
    max_rank_factor: float = 2.0,
    include_timings: bool = True,
) -> dict:
    """Estimate every manifest tensor and report per-tensor and aggregate metrics.

    ``mode`` is "frappe" (per-input self-supervised training) or "model"
    (a pre-trained global model from ``model_path``). Each tensor's candidate
    bound is max_rank_factor times its true rank.
    """
    if mode not in ("frappe", "model"):
        raise ValueError(f"unknown bench mode {mode!r}")
    model = None
    if mode == "model":
        if model_path is None:
            raise ValueError("model mode requires a model path")
        model = gbdt.load(model_path)
    manifest_path = Path(manifest_path)
    entries = load_manifest(manifest_path)
    record_seeds = np.random.default_rng(seed).integers(0, 2**63, size=len(entries))

    records = []
    preds, trues = [], []
    t_start = time.perf_counter()
    for entry, rec_seed in zip(entries, record_seeds):
        tensor = parse_tensor(manifest_path.parent / entry["path"])
        true_rank = int(entry["true_rank"])
        max_rank = max(1, clamp_rank(max_rank_factor * true_rank, 10**9))
        t0 = time.perf_counter()
        if mode == "frappe":
            opts = EstimateOptions(max_rank=max_rank, n_samples=n_samples, seed=int(rec_seed))
            est = estimate_rank(tensor, opts, n_threads=n_threads)
        else:
            est = predict_with_model(model, tensor, max_rank)
        wall_ms = (time.perf_counter() - t0) * 1e3
        rec = {
            "id": entry["path"],
            "true_rank": true_rank,
            "predicted_rank": est.rank,
            "abs_error": abs(est.rank - true_rank),
            "pct_error": abs(est.rank - true_rank) / true_rank * 100.0,
        }
        if include_timings:
            rec["wall_ms"] = wall_ms
        records.append(rec)
        preds.append(est.rank)
        trues.append(true_rank)

    aggregates = {
        "mape": mape(preds, trues),
        "mae": mae(preds, trues),
        "mse": mse(preds, trues),
        "spearman": spearman(preds, trues),
    }
    if include_timings:
        aggregates["total_ms"] = (time.perf_counter() - t_start) * 1e3
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "seed": seed,
        "config": {
            "mode": mode,
            "manifest": str(manifest_path),
            "model": str(model_path) if model_path else None,
            "n_samples": n_samples,
            "max_rank_factor": max_rank_factor,
            "threads": n_threads,
        },
        "records": records,
        "aggregates": aggregates,
    }
