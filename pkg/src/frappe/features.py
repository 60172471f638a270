"""Fixed-length explainable feature vectors for order-3/4 tensors.

Order-3 layout (112 features):
    #1-3     dims I, J, K
    #4       total non-zero count
    #5-13    per-mode slice non-zero counts, (min, median, max) per mode
    #14-22   per-mode slice numerical ranks, (min, median, max) per mode
    #23-103  counts of normalized values <= each threshold [0.1 .. 0.9],
             ordered threshold-major, then mode, then (min, median, max)
    #104-112 per-mode pairwise slice correlations, (min, median, max) per mode

Order-4 layout (133 features): same nnz / threshold / correlation blocks over
four modes (13 + 108 + 12 features); the dims and slice-rank blocks are
omitted because sub-tensor slices have no cheap rank.

All correlations are Pearson on vectorized slices; a pair involving a
zero-variance slice is defined as 0. Normalization for the threshold block is
min-max over the whole tensor, computed once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import CooTensor, DenseTensor, Tensor, unfold, value_range

DEFAULT_THRESHOLDS = tuple(round(0.1 * k, 1) for k in range(1, 10))

ORDER3_LENGTH = 112
ORDER4_LENGTH = 133


@dataclass(frozen=True)
class FeatureConfig:
    """Knobs for feature extraction; defaults reproduce the canonical vector."""

    rank_tolerance_mode: str = "relative"
    rank_tolerance_value: float | None = None
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    correlation_pair_cap: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.rank_tolerance_mode not in ("relative", "absolute"):
            raise ValueError(f"unknown rank tolerance mode {self.rank_tolerance_mode!r}")
        if self.rank_tolerance_mode == "absolute":
            if self.rank_tolerance_value is None or self.rank_tolerance_value <= 0:
                raise ValueError("absolute rank tolerance requires a positive value")
        thr = tuple(float(t) for t in self.thresholds)
        if not thr or any(not 0 < t < 1 for t in thr):
            raise ValueError("thresholds must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(thr, thr[1:])):
            raise ValueError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", thr)
        if self.correlation_pair_cap is not None and self.correlation_pair_cap < 1:
            raise ValueError("correlation_pair_cap must be >= 1")


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values in canonical order."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != len(vals):
            raise ValueError("names and values length mismatch")
        if not np.isfinite(vals).all():
            raise ValueError("feature values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def _threshold_label(t: float) -> str:
    return f"thr{int(round(t * 100)):02d}"


_STATS = ("min", "median", "max")


def _name_blocks(order: int, cfg: FeatureConfig):
    """Yield (name, group) pairs in canonical order."""
    modes = range(1, order + 1)
    blocks = []
    if order == 3:
        blocks += [(f"dim{m}", "dims") for m in modes]
    blocks.append(("nnz_total", "nnz"))
    blocks += [(f"nnz_mode{m}_{s}", "nnz") for m in modes for s in _STATS]
    if order == 3:
        blocks += [(f"rank_mode{m}_{s}", "ranks") for m in modes for s in _STATS]
    for t in cfg.thresholds:
        lbl = _threshold_label(t)
        blocks += [(f"{lbl}_mode{m}_{s}", lbl) for m in modes for s in _STATS]
    blocks += [(f"corr_mode{m}_{s}", "corr") for m in modes for s in _STATS]
    return [(f"f{i:03d}_{name}", group) for i, (name, group) in enumerate(blocks, start=1)]


def feature_names(order: int, cfg: FeatureConfig | None = None) -> tuple[str, ...]:
    cfg = cfg or FeatureConfig()
    return tuple(name for name, _ in _name_blocks(order, cfg))


def feature_groups(order: int, cfg: FeatureConfig | None = None) -> tuple[str, ...]:
    """Group label (dims, nnz, ranks, thrXX, corr) for each feature position."""
    cfg = cfg or FeatureConfig()
    return tuple(group for _, group in _name_blocks(order, cfg))


def numerical_rank(m, cfg: FeatureConfig | None = None) -> int:
    """Count singular values above the tolerance (relative rule by default)."""
    cfg = cfg or FeatureConfig()
    mat = np.asarray(m, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("numerical_rank expects a matrix")
    if not np.isfinite(mat).all():
        raise ValueError("matrix must be finite")
    sv = np.linalg.svd(mat, compute_uv=False)
    if cfg.rank_tolerance_mode == "absolute":
        tol = cfg.rank_tolerance_value
    else:
        tol = max(mat.shape) * sv[0] * np.finfo(np.float64).eps if len(sv) else 0.0
    return int((sv > tol).sum())


def _mmm(values) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=np.float64)
    n = arr.size
    if n == 0:
        return 0.0, 0.0, 0.0
    arr = np.sort(arr, kind="stable")
    mid = n >> 1
    med = arr[mid] if n & 1 else (arr[mid - 1] + arr[mid]) / 2.0
    return float(arr[0]), float(med), float(arr[-1])


def _as_tensor(t) -> Tensor:
    if isinstance(t, np.ndarray):
        return DenseTensor(t)
    if not isinstance(t, (DenseTensor, CooTensor)):
        raise TypeError(f"expected a tensor, got {type(t).__name__}")
    return t


def _slice_nnz_counts(t: Tensor, mode: int) -> np.ndarray:
    if isinstance(t, CooTensor):
        return np.bincount(t.indices[:, mode], minlength=t.shape[mode])
    axes = tuple(a for a in range(t.order) if a != mode)
    return np.count_nonzero(t.data, axis=axes)


def _slice_ranks(t: Tensor, mode: int, cfg: FeatureConfig) -> np.ndarray:
    if t.order != 3:
        raise ValueError("slice ranks are only defined for order-3 tensors")
    rest = t.shape[:mode] + t.shape[mode + 1 :]
    stack = unfold(t, mode).reshape(t.shape[mode], *rest)
    sv = np.linalg.svd(stack, compute_uv=False)
    if cfg.rank_tolerance_mode == "absolute":
        tol = np.full(len(sv), cfg.rank_tolerance_value)
    else:
        tol = max(rest) * sv[:, 0] * np.finfo(np.float64).eps
    return (sv > tol[:, None]).sum(axis=1)


def _pair_correlations(t: Tensor, mode: int, cfg: FeatureConfig) -> np.ndarray:
    """Pearson correlation for unordered pairs of (vectorized) slices of a mode."""
    d = t.shape[mode]
    if d < 2:
        return np.empty(0)
    rows = unfold(t, mode)
    centered = rows - rows.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    ok = norms > 0
    centered[ok] /= norms[ok, None]
    centered[~ok] = 0.0
    i_idx, j_idx = np.triu_indices(d, k=1)
    cap = cfg.correlation_pair_cap
    if cap is not None and len(i_idx) > cap:
        rng = np.random.default_rng(cfg.seed)
        pick = rng.choice(len(i_idx), size=cap, replace=False)
        pick.sort()
        i_idx, j_idx = i_idx[pick], j_idx[pick]
        corr = np.einsum("ij,ij->i", centered[i_idx], centered[j_idx])
    else:
        full = centered @ centered.T
        corr = full[i_idx, j_idx]
    return np.clip(corr, -1.0, 1.0)


def _threshold_counts(t: Tensor, lo: float, hi: float, thresholds) -> dict[int, np.ndarray]:
    """Per-mode arrays of shape (n_thresholds, dim): counts of normalized values <= thr.

    A single searchsorted pass bins every value by the first threshold it is
    <=; per-slice bincounts plus a cumulative sum then give all counts at
    once. ``searchsorted(..., side="left")`` reproduces the <= predicate
    exactly.
    """
    thr = np.asarray(thresholds)
    n_thr = len(thr)
    n_bins = n_thr + 1
    out = {}
    span = hi - lo
    if isinstance(t, CooTensor):
        z_norm = 0.0 if span == 0 else (0.0 - lo) / span
        bins = None if span == 0 else np.searchsorted(thr, (t.values - lo) / span, side="left")
        for mode in range(t.order):
            dim = t.shape[mode]
            slice_size = t.size // dim
            stored = np.bincount(t.indices[:, mode], minlength=dim)
            if span == 0:
                out[mode] = np.full((n_thr, dim), float(slice_size))
                continue
            comb = t.indices[:, mode] * n_bins + bins
            per_bin = np.bincount(comb, minlength=dim * n_bins).reshape(dim, n_bins)
            stored_le = per_bin.cumsum(axis=1)[:, :n_thr]
            implicit = (slice_size - stored)[:, None] * (z_norm <= thr)[None, :]
            out[mode] = (stored_le + implicit).T.astype(np.float64)
        return out
    if span == 0:
        for mode in range(t.order):
            dim = t.shape[mode]
            out[mode] = np.full((n_thr, dim), float(t.size // dim))
        return out
    bins = np.searchsorted(thr, (t.data - lo) / span, side="left")
    for mode in range(t.order):
        dim = t.shape[mode]
        moved = np.moveaxis(bins, mode, 0).reshape(dim, -1)
        comb = moved + (np.arange(dim) * n_bins)[:, None]
        per_bin = np.bincount(comb.ravel(), minlength=dim * n_bins).reshape(dim, n_bins)
        out[mode] = per_bin.cumsum(axis=1)[:, :n_thr].T.astype(np.float64)
    return out


def slice_stats(
    t, mode: int, kind: str, cfg: FeatureConfig | None = None, threshold: float | None = None
) -> tuple[float, float, float]:
    """(min, median, max) of a per-slice statistic along one mode.

    ``kind`` is one of ``nnz``, ``rank``, ``threshold_count`` (requires
    ``threshold``; the input must already be min-max normalized), or
    ``correlation`` (over unordered slice pairs).
    """
    cfg = cfg or FeatureConfig()
    t = _as_tensor(t)
    if not 0 <= mode < t.order:
        raise ValueError(f"mode {mode} out of bounds")
    if kind == "nnz":
        return _mmm(_slice_nnz_counts(t, mode))
    if kind == "rank":
        return _mmm(_slice_ranks(t, mode, cfg))
    if kind == "threshold_count":
        if threshold is None:
            raise ValueError("threshold_count requires a threshold")
        rows = unfold(t, mode)
        return _mmm((rows <= threshold).sum(axis=1))
    if kind == "correlation":
        return _mmm(_pair_correlations(t, mode, cfg))
    raise ValueError(f"unknown slice statistic {kind!r}")


def extract_features(t, cfg: FeatureConfig | None = None) -> FeatureVector:
    """Compute the canonical feature vector (112 values for order 3, 133 for 4)."""
    cfg = cfg or FeatureConfig()
    t = _as_tensor(t)
    order = t.order
    vals: list[float] = []

    if order == 3:
        vals += [float(d) for d in t.shape]
    vals.append(float(t.nnz()))
    for mode in range(order):
        vals += _mmm(_slice_nnz_counts(t, mode))
    if order == 3:
        for mode in range(order):
            vals += _mmm(_slice_ranks(t, mode, cfg))
    lo, hi = value_range(t)
    counts = _threshold_counts(t, lo, hi, cfg.thresholds)
    for k in range(len(cfg.thresholds)):
        for mode in range(order):
            vals += _mmm(counts[mode][k])
    for mode in range(order):
        vals += _mmm(_pair_correlations(t, mode, cfg))

    return FeatureVector(feature_names(order, cfg), np.array(vals))
