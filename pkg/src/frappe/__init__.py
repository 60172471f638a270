"""Canonical (CPD) rank estimation for tensors without computing a CPD.

Extract a fixed explainable feature vector from the input, synthesize
tensors of known rank matched to its shape and sparsity, train a disposable
boosted-tree regressor on them, and predict.
"""

__version__ = "0.1.0"

from .cpd import AlsOptions, CpdResult, cp_als, error_curve
from .features import (
    FeatureConfig,
    FeatureVector,
    extract_features,
    feature_groups,
    feature_names,
    numerical_rank,
    slice_stats,
)
from .gbdt import GbdtModel, GbdtParams
from .pipeline import (
    EstimateOptions,
    RankEstimate,
    estimate_rank,
    predict_with_model,
    train_global,
)
from .synth import (
    LabeledTensor,
    SynthRecipe,
    gen_dataset,
    gen_tensor,
    match_recipes,
    solve_factor_density,
)
from .tensor import (
    CooTensor,
    DenseTensor,
    FactorSet,
    add_scaled_noise,
    from_factors,
    minmax_normalize,
    unfold,
)
from .tensor_io import ParseError, parse_tensor, write_tensor

__all__ = [
    "AlsOptions",
    "CooTensor",
    "CpdResult",
    "DenseTensor",
    "EstimateOptions",
    "FactorSet",
    "FeatureConfig",
    "FeatureVector",
    "GbdtModel",
    "GbdtParams",
    "LabeledTensor",
    "ParseError",
    "RankEstimate",
    "SynthRecipe",
    "add_scaled_noise",
    "cp_als",
    "error_curve",
    "estimate_rank",
    "extract_features",
    "feature_groups",
    "feature_names",
    "from_factors",
    "gen_dataset",
    "gen_tensor",
    "match_recipes",
    "minmax_normalize",
    "numerical_rank",
    "parse_tensor",
    "predict_with_model",
    "slice_stats",
    "solve_factor_density",
    "train_global",
    "unfold",
    "write_tensor",
]
