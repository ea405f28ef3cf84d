"""Rejection samplers that keep a base model within ``k`` bits of a safe cover.

A draw ``y ~ p`` is scored against every cover model.  The hard variant
accepts iff ``log2 p(y)/q(y) <= k`` for all ``q``; the smooth variant
accepts with probability ``min(1, min_q 2^k q(y)/p(y))``.  If ``nu`` is the
per-attempt acceptance probability, the accepted law ``p_k`` satisfies
``p_k(y) <= 2^(k + log2(1/nu)) q(y)`` for every cover model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .dist import Categorical, UnnormalizedWeights, align_many, renormalize
from .errors import (
    EnumerationInfeasibleError,
    ExhaustedError,
    InvalidInputError,
    NoFiniteKError,
    UndefinedBoundError,
    VocabMismatchError,
)
from .models import ConditionalModel, as_tokens, sample_sequence, score_sequence, sequence_distribution

DEFAULT_MAX_ATTEMPTS = 10_000
DEFAULT_MAX_LEN = 32


class Variant(str, enum.Enum):
    HARD = "hard"
    SMOOTH = "smooth"


@dataclass(frozen=True)
class SampleResult:
    tokens: tuple
    attempts: int
    log_p: float
    log_q: tuple

    @property
    def ratio_bits(self) -> float:
        return max(self.log_p - lq for lq in self.log_q)


@dataclass(frozen=True)
class CPkSampler:
    """CP-k (``HARD``) or smooth-CP-k (``SMOOTH``) around ``base``.

    ``streaming`` (hard only) rejects as soon as a prefix's running ratio
    exceeds ``k``.  That changes ``p_k`` (it rejects more) but every accepted
    output still satisfies the full-sequence test.
    """

    base: ConditionalModel
    cover: tuple
    k: float
    variant: Variant = Variant.HARD
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    max_len: int = DEFAULT_MAX_LEN
    streaming: bool = False

    def __post_init__(self):
        cover = tuple(self.cover.models if hasattr(self.cover, "models") else self.cover)
        object.__setattr__(self, "cover", cover)
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "k", float(self.k))
        if not cover:
            raise InvalidInputError("the cover must contain at least one model")
        if math.isnan(self.k) or self.k < 0:
            raise InvalidInputError("threshold k must be >= 0")
        if self.max_attempts < 1:
            raise InvalidInputError("max_attempts must be positive")
        if self.streaming and self.variant is not Variant.HARD:
            raise InvalidInputError("streaming rejection is only defined for the hard variant")
        for q in cover:
            if q.vocab.tokens != self.base.vocab.tokens:
                raise VocabMismatchError("base and cover models must share one vocabulary")

    def scores(self, prompt, y) -> tuple[float, tuple]:
        log_p = score_sequence(self.base, prompt, y)
        return log_p, tuple(score_sequence(q, prompt, y) for q in self.cover)

    def log_ratio(self, prompt, y) -> float:
        """``max_q log2 p(y)/q(y)``, the left-hand side of the threshold test."""
        log_p, log_q = self.scores(prompt, y)
        return max(_ratio(log_p, lq) for lq in log_q)

    def _prefix_ok(self, prompt: tuple, y: tuple) -> bool:
        running = [0.0] * len(self.cover)
        for t, tok in enumerate(y):
            lp = math.log2(self.base.token_prob(prompt, y[:t], tok))
            for j, q in enumerate(self.cover):
                pq = q.token_prob(prompt, y[:t], tok)
                running[j] += math.inf if pq <= 0 else lp - math.log2(pq)
            if max(running) > self.k:
                return False
        return True

    def accept_prob(self, prompt, y) -> float:
        prompt = as_tokens(prompt)
        y = tuple(y)
        if math.isinf(self.k):
            return 1.0
        if self.streaming:
            return 1.0 if self._prefix_ok(prompt, y) else 0.0
        r = self.log_ratio(prompt, y)
        if r <= self.k:
            return 1.0
        if self.variant is Variant.HARD:
            return 0.0
        return 2.0 ** (self.k - r)

    def attempt(self, prompt, rng: np.random.Generator) -> tuple[tuple, bool]:
        """One iteration of the rejection loop: a draw and its verdict."""
        y = sample_sequence(self.base, prompt, rng, self.max_len)
        a = self.accept_prob(prompt, y)
        if a >= 1.0:
            return y, True
        if a <= 0.0:
            return y, False
        return y, bool(rng.random() < a)

    def sample(self, prompt, rng: np.random.Generator) -> SampleResult:
        prompt = as_tokens(prompt)
        for attempts in range(1, self.max_attempts + 1):
            y, ok = self.attempt(prompt, rng)
            if ok:
                log_p, log_q = self.scores(prompt, y)
                return SampleResult(y, attempts, log_p, log_q)
        raise ExhaustedError(self.max_attempts)


def _ratio(log_p: float, log_q: float) -> float:
    if log_q == -math.inf:
        return math.inf
    return log_p - log_q


def cpk_sample(s: CPkSampler, prompt, rng: np.random.Generator) -> tuple:
    return s.sample(prompt, rng).tokens


# --------------------------------------------------------------------------
# exact quantities on enumerable output spaces


def acceptance_table(s: CPkSampler, prompt, cap: int | None = None) -> tuple[Categorical, np.ndarray]:
    """Base output distribution and per-output acceptance probability."""
    p = sequence_distribution(s.base, prompt, s.max_len, cap)
    accept = np.array([s.accept_prob(prompt, y) for y in p.labels])
    return p, accept


def exact_nu(s: CPkSampler, prompt, cap: int | None = None) -> float:
    p, accept = acceptance_table(s, prompt, cap)
    return math.fsum(p.probs * accept)


def cpk_distribution(s: CPkSampler, prompt, cap: int | None = None) -> tuple[Categorical, float]:
    """The accepted law ``p_k`` and ``nu`` by exhaustive summation."""
    p, accept = acceptance_table(s, prompt, cap)
    if not np.any(p.probs * accept > 0):
        raise UndefinedBoundError("no output is ever accepted at this threshold")
    dist, nu = renormalize(UnnormalizedWeights(p.labels, p.probs * accept))
    return dist, nu


@dataclass(frozen=True)
class AcceptanceStats:
    nu_hat: float
    ci_low: float
    ci_high: float
    trials: int
    exact: bool

    def report(self, k: float) -> dict:
        try:
            kt = k_tilde(k, self.nu_hat)
        except UndefinedBoundError:
            kt = math.inf
        return {
            "k": _json_bits(k),
            "nu": self.nu_hat,
            "nu_ci": [self.ci_low, self.ci_high],
            "k_tilde": _json_bits(kt),
            "exact": self.exact,
        }


def _json_bits(x: float):
    return "inf" if math.isinf(x) else x


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def estimate_nu(
    s: CPkSampler,
    prompt,
    trials: int,
    rng: np.random.Generator,
    exact: bool | None = None,
    cap: int | None = None,
) -> AcceptanceStats:
    """Acceptance probability of one loop iteration.

    ``exact=None`` enumerates when the output space fits under the cap and
    falls back to ``trials`` Monte-Carlo attempts otherwise.
    """
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    if exact is not False:
        try:
            nu = exact_nu(s, prompt, cap)
            return AcceptanceStats(nu, nu, nu, trials, True)
        except EnumerationInfeasibleError:
            if exact:
                raise
    prompt = as_tokens(prompt)
    hits = sum(s.attempt(prompt, rng)[1] for _ in range(trials))
    lo, hi = wilson_interval(hits, trials)
    nu_hat = hits / trials
    return AcceptanceStats(nu_hat, min(lo, nu_hat), max(hi, nu_hat), trials, False)


def k_tilde(k: float, nu: float) -> float:
    """``k + log2(1/nu)``: the divergence bound actually achieved by ``p_k``."""
    if not nu > 0:
        raise UndefinedBoundError("acceptance probability 0 gives no finite bound")
    if nu > 1:
        raise InvalidInputError("acceptance probability cannot exceed 1")
    return k - math.log2(nu)


@dataclass(frozen=True)
class DistanceToCouple:
    d: float


def dx_from_dists(p: Categorical, cover: Sequence[Categorical]) -> DistanceToCouple:
    """``sum_y (p(y) - min_q q(y))_+``."""
    _, rows = align_many([p, *cover])
    excess = rows[0] - rows[1:].min(axis=0)
    return DistanceToCouple(min(1.0, math.fsum(excess[excess > 0])))


def compute_dx(p: ConditionalModel, cover, prompt, max_len: int = DEFAULT_MAX_LEN, cap: int | None = None) -> DistanceToCouple:
    models = cover.models if hasattr(cover, "models") else cover
    pd = sequence_distribution(p, prompt, max_len, cap)
    qd = [sequence_distribution(q, prompt, max_len, cap) for q in models]
    return dx_from_dists(pd, qd)


def efficiency_bound(d: float, variant: Variant) -> tuple[float, float]:
    """Threshold ``k`` at which the lower bound on ``nu`` applies, and that bound.

    Hard: ``k >= log2(2/(1-d))`` gives ``nu >= (1-d)/(1+d)``.
    Smooth: any ``k >= 0`` gives ``nu >= 1-d``.
    """
    if not 0 <= d:
        raise InvalidInputError("d must be non-negative")
    if d >= 1:
        raise NoFiniteKError("d >= 1: no model is k-NAF for finite k with respect to this cover")
    if Variant(variant) is Variant.HARD:
        return math.log2(2.0 / (1.0 - d)), (1.0 - d) / (1.0 + d)
    return 0.0, 1.0 - d


def log_ratio_percentile(
    base: ConditionalModel,
    cover,
    prompt,
    samples: int,
    percentile: float,
    rng: np.random.Generator,
    max_len: int = DEFAULT_MAX_LEN,
) -> tuple[float, np.ndarray]:
    """Empirical percentile of ``max_q log2 p(y)/q(y)`` over draws from ``base``.

    Returns the percentile and the raw ratios (useful for histograms).
    """
    probe = CPkSampler(base, cover, math.inf, max_len=max_len)
    prompt = as_tokens(prompt)
    ratios = np.array([probe.log_ratio(prompt, sample_sequence(base, prompt, rng, max_len)) for _ in range(samples)])
    return float(np.percentile(ratios, percentile, method="lower")), ratios
