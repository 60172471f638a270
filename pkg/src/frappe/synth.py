"""Synthetic tensors of known canonical rank.

Three generation classes, each built from uniform(0,1) CPD factors:
``sparse_sparse`` (sparsified factors, Gaussian noise only on the non-zero
support), ``sparse_dense`` (sparsified factors, dense Gaussian noise) and
``dense`` (full factors, dense Gaussian noise). Noise is norm-scaled so its
relative Frobenius norm equals the recipe's alpha.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tensor import CooTensor, DenseTensor, FactorSet, Tensor, add_scaled_noise, from_factors

CLASSES = ("sparse_sparse", "sparse_dense", "dense")

MAX_REDRAWS = 100


@dataclass(frozen=True)
class SynthRecipe:
    klass: str
    shape: tuple[int, ...]
    rank: int
    noise_alpha: float
    factor_density: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.klass not in CLASSES:
            raise ValueError(f"unknown class {self.klass!r}")
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if len(self.shape) not in (3, 4) or any(d < 1 for d in self.shape):
            raise ValueError(f"bad shape {self.shape}")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not 0 <= self.noise_alpha < 1:
            raise ValueError("noise_alpha must lie in [0, 1)")
        if not 0 < self.factor_density <= 1:
            raise ValueError("factor_density must lie in (0, 1]")
        if self.klass == "dense" and self.factor_density != 1:
            raise ValueError("dense class requires factor_density == 1")


@dataclass(frozen=True)
class LabeledTensor:
    tensor: Tensor
    true_rank: int
    recipe: SynthRecipe

    def __post_init__(self):
        if self.true_rank != self.recipe.rank:
            raise ValueError("label disagrees with recipe rank")


def solve_factor_density(target_density: float, rank: int, order: int = 3) -> float:
    """Per-factor-entry keep probability giving expected tensor density ~= target.

    Inverts 1 - (1 - p^order)^rank == d, the exact per-entry non-zero
    probability when factor entries are kept i.i.d. with probability p.
    """
    if not 0 < target_density <= 1:
        raise ValueError("target density must lie in (0, 1]")
    if rank < 1:
        raise ValueError("rank must be >= 1")
    return float((1.0 - (1.0 - target_density) ** (1.0 / rank)) ** (1.0 / order))


def gen_tensor(recipe: SynthRecipe) -> LabeledTensor:
    """Draw the tensor described by a recipe; deterministic given its seed."""
    rng = np.random.default_rng(recipe.seed)
    sparse = recipe.klass != "dense"
    noiseless = None
    for _ in range(MAX_REDRAWS):
        mats = []
        for dim in recipe.shape:
            f = rng.random((dim, recipe.rank))
            if sparse:
                f = f * (rng.random((dim, recipe.rank)) < recipe.factor_density)
            mats.append(f)
        noiseless = from_factors(FactorSet(mats))
        if noiseless.nnz() > 0:
            break
    else:
        raise ValueError(f"all-zero tensor after {MAX_REDRAWS} redraws (recipe {recipe})")

    if recipe.noise_alpha > 0:
        noise = rng.standard_normal(recipe.shape)
        if recipe.klass == "sparse_sparse":
            noise = np.where(noiseless.data != 0.0, noise, 0.0)
        noisy = add_scaled_noise(noiseless, DenseTensor(noise), recipe.noise_alpha)
    else:
        noisy = noiseless

    out: Tensor = noisy.to_coo() if recipe.klass == "sparse_sparse" else noisy
    return LabeledTensor(out, recipe.rank, recipe)


def _normalize_counts(counts) -> dict[str, int]:
    if isinstance(counts, dict):
        unknown = set(counts) - set(CLASSES)
        if unknown:
            raise ValueError(f"unknown classes {sorted(unknown)}")
        return {k: int(counts.get(k, 0)) for k in CLASSES}
    counts = tuple(counts)
    if len(counts) != len(CLASSES):
        raise ValueError(f"need one count per class {CLASSES}")
    return dict(zip(CLASSES, (int(c) for c in counts)))


def gen_dataset(
    counts,
    dims,
    rank_range: tuple[int, int],
    noise_range: tuple[float, float] = (0.02, 0.10),
    seed: int = 0,
    order: int = 3,
    factor_density_range: tuple[float, float] = (0.3, 0.9),
) -> list[LabeledTensor]:
    """Generate a labeled corpus: ``counts`` tensors per class, parameters
    drawn uniformly from their ranges, per-tensor seeds derived by counter.

    ``dims`` is either a (lo, hi) range sampled per dimension or an explicit
    shape used for every tensor.
    """
    counts = _normalize_counts(counts)
    lo_r, hi_r = int(rank_range[0]), int(rank_range[1])
    if lo_r < 1 or hi_r < lo_r:
        raise ValueError(f"bad rank range ({lo_r}, {hi_r})")
    lo_a, hi_a = noise_range
    if not 0 <= lo_a <= hi_a < 1:
        raise ValueError(f"bad noise range ({lo_a}, {hi_a})")
    dims = tuple(int(d) for d in dims)
    fixed_shape = len(dims) == order

    rng = np.random.default_rng(seed)
    out = []
    for klass in CLASSES:
        for _ in range(counts[klass]):
            shape = dims if fixed_shape else tuple(rng.integers(dims[0], dims[1] + 1, size=order))
            rank = int(rng.integers(lo_r, hi_r + 1))
            alpha = float(rng.uniform(lo_a, hi_a))
            if klass == "dense":
                density = 1.0
            else:
                density = float(rng.uniform(*factor_density_range))
            recipe = SynthRecipe(
                klass=klass,
                shape=shape,
                rank=rank,
                noise_alpha=alpha,
                factor_density=density,
                seed=int(rng.integers(0, 2**63)),
            )
            out.append(gen_tensor(recipe))
    return out


def match_recipes(
    t: Tensor,
    max_rank: int,
    n_samples: int,
    noise_range: tuple[float, float] = (0.02, 0.10),
    seed: int = 0,
) -> list[SynthRecipe]:
    """Recipes whose shape and (expected) sparsity mimic the input tensor."""
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    lo_a, hi_a = noise_range
    if not 0 <= lo_a <= hi_a < 1:
        raise ValueError(f"bad noise range ({lo_a}, {hi_a})")
    density = t.density()
    if density == 0:
        raise ValueError("cannot match an all-zero tensor")

    rng = np.random.default_rng(seed)
    recipes = []
    for i in range(n_samples):
        rank = int(rng.integers(1, max_rank + 1))
        alpha = float(rng.uniform(lo_a, hi_a))
        child_seed = int(rng.integers(0, 2**63))
        if density >= 0.999:
            klass, fd = "dense", 1.0
        else:
            klass = "sparse_sparse" if i % 2 == 0 else "sparse_dense"
            fd = solve_factor_density(density, rank, t.order)
        recipes.append(
            SynthRecipe(
                klass=klass,
                shape=t.shape,
                rank=rank,
                noise_alpha=alpha,
                factor_density=fd,
                seed=child_seed,
            )
        )
    return recipes


def with_alpha(recipe: SynthRecipe, alpha: float) -> SynthRecipe:
    """Same recipe with a different noise level; shares all random draws."""
    return replace(recipe, noise_alpha=alpha)
