"""Combine shard models by pointwise minimum or geometric mean.

With ``MAX`` the combined distribution is ``min_i q_i / Z`` and is
``-log2 Z``-close to every source in max-divergence.  With ``KL`` it is
``(prod_i q_i)^(1/(m+1)) / Z``, i.e. an average in log space, and is
``-(m+1) log2 Z``-close in KL.  For two sources ``Z = 1 - TV`` and
``Z = 1 - H^2`` respectively.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dist import Categorical, UnnormalizedWeights, align_many, renormalize
from .errors import InvalidInputError, NoOverlapError, VocabMismatchError
from .models import ConditionalModel, as_tokens, sample_sequence, sequence_distribution

MIN_PARTITION = 1e-12


class Divergence(str, enum.Enum):
    MAX = "max"
    KL = "kl"


@dataclass(frozen=True)
class CombineResult:
    dist: Categorical
    z: float
    k_bound: float


def combine_weights(rows: np.ndarray, divergence: Divergence) -> np.ndarray:
    """Unnormalized combined weights from a (sources x labels) matrix."""
    divergence = Divergence(divergence)
    if divergence is Divergence.MAX:
        return rows.min(axis=0)
    out = np.zeros(rows.shape[1])
    on = np.all(rows > 0, axis=0)
    # mean of logs: a plain product underflows for many sources
    out[on] = np.exp2(np.log2(rows[:, on]).mean(axis=0))
    return out


def k_bound_from_z(z: float, num_sources: int, divergence: Divergence) -> float:
    if Divergence(divergence) is Divergence.MAX:
        return max(0.0, -math.log2(z))
    return max(0.0, -num_sources * math.log2(z))


def combine_next(sources: Sequence[Categorical], divergence: Divergence) -> CombineResult:
    if len(sources) < 2:
        raise InvalidInputError("need at least two sources to combine")
    labels, rows = align_many(list(sources))
    weights = combine_weights(rows, divergence)
    try:
        dist, z = renormalize(UnnormalizedWeights(labels, weights), min_mass=MIN_PARTITION)
    except NoOverlapError:
        raise NoOverlapError("sources share (almost) no support: no finite-k combination exists") from None
    return CombineResult(dist, z, k_bound_from_z(z, len(sources), divergence))


def check_shared_vocab(models: Sequence[ConditionalModel]) -> None:
    first = models[0].vocab.tokens
    for model in models[1:]:
        if model.vocab.tokens != first:
            raise VocabMismatchError("all models must share one vocabulary")


class CPDeltaModel(ConditionalModel):
    """Token-level combination of shard models, usable as any other model."""

    def __init__(self, sources: Sequence[ConditionalModel], divergence: Divergence = Divergence.MAX):
        if len(sources) < 2:
            raise InvalidInputError("need at least two source models")
        check_shared_vocab(sources)
        self.sources = tuple(sources)
        self.divergence = Divergence(divergence)
        self.vocab = sources[0].vocab
        steps = {s.max_steps for s in sources}
        if len(steps) != 1:
            raise InvalidInputError("sources must be the same kind of model")
        self.max_steps = steps.pop()
        self._combined: dict = {}

    @property
    def m(self) -> int:
        return len(self.sources) - 1

    def context_key(self, prompt: tuple, prefix: tuple):
        return tuple(s.context_key(prompt, prefix) for s in self.sources)

    def combine_at(self, prompt=(), prefix=()) -> CombineResult:
        prompt = as_tokens(prompt)
        prefix = tuple(prefix)
        key = self.context_key(prompt, prefix)
        hit = self._combined.get(key)
        if hit is None:
            rows = np.vstack([s.next_probs(prompt, prefix) for s in self.sources])
            weights = combine_weights(rows, self.divergence)
            try:
                dist, z = renormalize(UnnormalizedWeights(self.vocab.tokens, weights), min_mass=MIN_PARTITION)
            except NoOverlapError:
                raise NoOverlapError(f"sources share no support after prefix {prefix!r}") from None
            hit = self._combined[key] = CombineResult(dist, z, k_bound_from_z(z, len(self.sources), self.divergence))
        return hit

    def next_probs(self, prompt=(), prefix=()) -> np.ndarray:
        prompt = as_tokens(prompt)
        prefix = tuple(prefix)
        key = self.context_key(prompt, prefix)
        cache = self._cache
        hit = cache.get(key)
        if hit is None:
            probs = np.asarray(self.combine_at(prompt, prefix).dist.probs)
            hit = cache[key] = (probs, np.cumsum(probs))
        return hit[0]

    def is_complete(self, prefix: tuple) -> bool:
        return self.sources[0].is_complete(prefix)


def cp_delta_model(cover, divergence: Divergence = Divergence.MAX) -> CPDeltaModel:
    """Wrap a SafeCover (or any sequence of models) as a combined model."""
    models = cover.models if hasattr(cover, "models") else cover
    return CPDeltaModel(list(models), divergence)


def sequence_k_bound(model: CPDeltaModel, prompt, y) -> float:
    """Sum of per-context bounds along the path of ``y``.

    Upper-bounds ``log2 p(y|x) / q_i(y|x)`` for every source under MAX.  This
    is a chain-rule bound, not the tight sequence-level value.
    """
    prompt = as_tokens(prompt)
    y = tuple(y)
    return math.fsum(model.combine_at(prompt, y[:t]).k_bound for t in range(len(y)))


def combine_sequences(sources: Sequence[ConditionalModel], prompt, divergence: Divergence, max_len: int, cap: int | None = None) -> CombineResult:
    """Exact CP-Delta on the joint output distributions of enumerable models."""
    dists = [sequence_distribution(s, prompt, max_len, cap) for s in sources]
    return combine_next(dists, divergence)


def logit_average(rows: np.ndarray) -> np.ndarray:
    """Softmax of the mean of log-probabilities (the KL combiner in logit form)."""
    logits = np.log(rows).mean(axis=0)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def context_z_values(model: CPDeltaModel, prompt, rng: np.random.Generator, samples: int, max_len: int) -> np.ndarray:
    """``Z`` at every distinct context visited while sampling ``samples`` outputs."""
    prompt = as_tokens(prompt)
    seen: dict = {}
    for _ in range(samples):
        y = sample_sequence(model, prompt, rng, max_len)
        for t in range(len(y)):
            key = model.context_key(prompt, y[:t])
            if key not in seen:
                seen[key] = model.combine_at(prompt, y[:t]).z
    return np.array(list(seen.values()))


def z_summary(zs: np.ndarray) -> dict:
    """Summary of per-context partition values and the bounds they imply (bits)."""
    if len(zs) == 0:
        raise InvalidInputError("no contexts visited")
    bits = -np.log2(zs)
    counts, edges = np.histogram(zs, bins=10, range=(0.0, 1.0))
    return {
        "contexts": int(len(zs)),
        "z_min": float(zs.min()),
        "z_median": float(np.median(zs)),
        "z_max": float(zs.max()),
        "neg_log_z_max": float(bits.max()),
        "neg_log_z_mean": float(bits.mean()),
        "histogram": {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]},
    }
