"""Validation-only CP-ALS decomposition at a fixed rank.

This module exists to check generated labels and to produce
reconstruction-error curves. The estimation pipeline never calls it; the
module-level invocation counter lets tests prove that.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass

import numpy as np

from .tensor import FactorSet, Tensor, from_factors

_MTTKRP_SPEC = {
    (3, 0): "ijk,jr,kr->ir",
    (3, 1): "ijk,ir,kr->jr",
    (3, 2): "ijk,ir,jr->kr",
    (4, 0): "ijkl,jr,kr,lr->ir",
    (4, 1): "ijkl,ir,kr,lr->jr",
    (4, 2): "ijkl,ir,jr,lr->kr",
    (4, 3): "ijkl,ir,jr,kr->lr",
}

_als_lock = threading.Lock()
_als_calls = 0


def als_invocations() -> int:
    """How many times cp_als has run since the last reset."""
    return _als_calls


def reset_als_invocations() -> None:
    global _als_calls
    with _als_lock:
        _als_calls = 0


@dataclass(frozen=True)
class AlsOptions:
    max_iters: int = 200
    rel_change_tol: float = 1e-8
    n_restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_change_tol <= 0:
            raise ValueError("rel_change_tol must be > 0")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")


@dataclass(frozen=True)
class CpdResult:
    factors: FactorSet
    relative_error: float
    iterations: int
    converged: bool
    error_history: tuple[float, ...]


def _als_once(data: np.ndarray, rank: int, opts: AlsOptions, restart: int):
    order = data.ndim
    norm_t = np.linalg.norm(data)
    rng = np.random.default_rng([opts.seed, restart])
    factors = [rng.random((dim, rank)) for dim in data.shape]

    history = []
    prev = None
    converged = False
    for _ in range(opts.max_iters):
        for mode in range(order):
            gram = np.ones((rank, rank))
            for m, f in enumerate(factors):
                if m != mode:
                    gram *= f.T @ f
            mttkrp = np.einsum(
                _MTTKRP_SPEC[(order, mode)],
                data,
                *(f for m, f in enumerate(factors) if m != mode),
                optimize=True,
            )
            factors[mode] = mttkrp @ np.linalg.pinv(gram)
        recon = from_factors(FactorSet(factors)).data
        err = float(np.linalg.norm(data - recon) / norm_t)
        history.append(err)
        if prev is not None and abs(prev - err) < opts.rel_change_tol:
            converged = True
            break
        prev = err
    return factors, history, converged


def cp_als(t: Tensor, rank: int, opts: AlsOptions | None = None) -> CpdResult:
    """Best-of-restarts alternating least squares fit at a fixed rank."""
    global _als_calls
    with _als_lock:
        _als_calls += 1
    opts = opts or AlsOptions()
    if rank < 1:
        raise ValueError("rank must be >= 1")
    data = t.to_dense().data
    if np.linalg.norm(data) == 0.0:
        raise ValueError("cannot decompose the zero tensor")
    for mode, dim in enumerate(data.shape):
        others = data.size // dim
        if rank > others:
            warnings.warn(
                f"rank {rank} exceeds the product of the non-mode-{mode} dims ({others})",
                stacklevel=2,
            )
            break

    best = None
    for restart in range(opts.n_restarts):
        factors, history, converged = _als_once(data, rank, opts, restart)
        if best is None or history[-1] < best[1][-1]:
            best = (factors, history, converged)
    factors, history, converged = best
    return CpdResult(
        factors=FactorSet(factors),
        relative_error=history[-1],
        iterations=len(history),
        converged=converged,
        error_history=tuple(history),
    )


def error_curve(t: Tensor, ranks, opts: AlsOptions | None = None) -> list[tuple[int, CpdResult]]:
    """One cp_als per rank; output aligned with the requested (ascending) ranks."""
    ranks = [int(r) for r in ranks]
    if not ranks:
        raise ValueError("ranks must be non-empty")
    if any(b <= a for a, b in zip(ranks, ranks[1:])):
        raise ValueError("ranks must be ascending")
    return [(r, cp_als(t, r, opts)) for r in ranks]
