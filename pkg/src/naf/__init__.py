"""Near access-free sampling from sharded discrete generative models."""

from .cp_delta import CPDeltaModel, Divergence, combine_next, cp_delta_model
from .cp_k import CPkSampler, Variant, cpk_distribution, estimate_nu, exact_nu, k_tilde
from .dist import Categorical, dmax, hellinger_sq, kl, tv
from .models import NGramModel, TableModel, Vocab, train_ngram
from .sharding import Dataset, build_safe_cover, plan_shards

__all__ = [
    "CPDeltaModel",
    "CPkSampler",
    "Categorical",
    "Dataset",
    "Divergence",
    "NGramModel",
    "TableModel",
    "Variant",
    "Vocab",
    "build_safe_cover",
    "combine_next",
    "cp_delta_model",
    "cpk_distribution",
    "dmax",
    "estimate_nu",
    "exact_nu",
    "hellinger_sq",
    "k_tilde",
    "kl",
    "plan_shards",
    "train_ngram",
    "tv",
]
