"""Conditional generative models over token sequences.

A model maps a prompt (tuple of tokens) and a generated prefix to a
next-token distribution over its vocabulary.  Outputs ``y`` are token tuples
that end with EOS, or that were cut off at ``max_len``; a truncated output is
a complete output, which keeps the output space finite.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .dist import Categorical
from .errors import (
    EmptyDatasetError,
    EnumerationInfeasibleError,
    InvalidInputError,
)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
CONTEXT_SEP = "\u001f"
DEFAULT_ENUM_CAP = 10**6
DEFAULT_ALPHA = 0.1


def enum_cap_from_env(default: int = DEFAULT_ENUM_CAP) -> int:
    raw = os.environ.get("NAF_ENUM_CAP")
    return int(raw) if raw else default


def as_tokens(text) -> tuple:
    if text is None:
        return ()
    if isinstance(text, str):
        return tuple(text.split())
    return tuple(text)


@dataclass(frozen=True)
class Vocab:
    tokens: tuple
    markers: bool = True

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if len(set(tokens)) != len(tokens):
            raise InvalidInputError("vocabulary tokens must be unique")
        if self.markers and (BOS not in tokens or EOS not in tokens):
            raise InvalidInputError("vocabulary must contain BOS and EOS")
        if UNK in tokens:
            raise InvalidInputError(f"{UNK} is reserved for out-of-vocabulary context tokens")

    @classmethod
    def from_documents(cls, documents: Iterable[str]) -> "Vocab":
        words = {tok for doc in documents for tok in doc.split()}
        words -= {BOS, EOS}
        return cls((BOS, EOS) + tuple(sorted(words)))

    @cached_property
    def index(self) -> dict:
        return {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, tok) -> bool:
        return tok in self.index


class ConditionalModel:
    """Base class: subclasses supply ``vocab``, ``context_key`` and ``_probs``.

    ``max_steps`` caps output length independently of any caller ``max_len``
    (a table model emits exactly one token).
    """

    vocab: Vocab
    max_steps: int | None = None

    def context_key(self, prompt: tuple, prefix: tuple) -> Hashable:
        raise NotImplementedError

    def _probs(self, key) -> np.ndarray:
        raise NotImplementedError

    def is_complete(self, prefix: tuple) -> bool:
        raise NotImplementedError

    @property
    def _cache(self) -> dict:
        try:
            return self.__dict__["_prob_cache"]
        except KeyError:
            self.__dict__["_prob_cache"] = {}
            return self.__dict__["_prob_cache"]

    def next_probs(self, prompt=(), prefix=()) -> np.ndarray:
        """Next-token probabilities aligned with ``self.vocab.tokens``."""
        key = self.context_key(as_tokens(prompt), tuple(prefix))
        cache = self._cache
        hit = cache.get(key)
        if hit is None:
            probs = np.asarray(self._probs(key), dtype=np.float64)
            probs.flags.writeable = False
            cdf = np.cumsum(probs)
            hit = cache[key] = (probs, cdf)
        return hit[0]

    def _next_cdf(self, prompt: tuple, prefix: tuple) -> np.ndarray:
        self.next_probs(prompt, prefix)
        return self._cache[self.context_key(prompt, prefix)][1]

    def next_token_dist(self, prompt=(), prefix=()) -> Categorical:
        return Categorical(self.vocab.tokens, self.next_probs(prompt, prefix))

    def token_prob(self, prompt: tuple, prefix: tuple, token) -> float:
        i = self.vocab.index.get(token)
        if i is None:
            return 0.0
        return float(self.next_probs(prompt, prefix)[i])

    def effective_max_len(self, max_len: int) -> int:
        return max_len if self.max_steps is None else min(max_len, self.max_steps)


# --------------------------------------------------------------------------
# n-gram language model


class NGramModel(ConditionalModel):
    """Add-alpha smoothed n-gram model.

    ``counts`` maps a context (tuple of ``n - 1`` tokens, BOS padded) to
    per-token counts.  The next-token probability is
    ``(count + alpha) / (total + alpha * |vocab|)``.
    """

    def __init__(self, vocab: Vocab, n: int, counts: Mapping[tuple, Mapping[str, float]], alpha: float):
        if n < 1:
            raise InvalidInputError("n-gram order must be at least 1")
        if not alpha > 0:
            raise InvalidInputError("alpha must be > 0; zero smoothing gives disjoint supports")
        self.vocab = vocab
        self.n = int(n)
        self.alpha = float(alpha)
        self.counts = {tuple(ctx): dict(row) for ctx, row in counts.items()}
        for ctx, row in self.counts.items():
            if len(ctx) != self.n - 1:
                raise InvalidInputError(f"context {ctx!r} does not have length {self.n - 1}")
            for tok, c in row.items():
                if tok not in vocab:
                    raise InvalidInputError(f"count for unknown token {tok!r}")
                if c < 0:
                    raise InvalidInputError("counts must be non-negative")
        self._rows = {}
        for ctx, row in self.counts.items():
            arr = np.zeros(len(vocab))
            for tok, c in row.items():
                arr[vocab.index[tok]] = c
            self._rows[ctx] = arr

    def context_key(self, prompt: tuple, prefix: tuple) -> tuple:
        if self.n == 1:
            return ()
        history = prompt + prefix
        if len(history) < self.n - 1:
            history = (BOS,) * (self.n - 1 - len(history)) + history
        ctx = history[len(history) - (self.n - 1):]
        return tuple(tok if tok in self.vocab.index else UNK for tok in ctx)

    def _probs(self, key) -> np.ndarray:
        v = len(self.vocab)
        row = self._rows.get(key)
        if row is None:
            return np.full(v, 1.0 / v)
        return (row + self.alpha) / (math.fsum(row) + self.alpha * v)

    def is_complete(self, prefix: tuple) -> bool:
        return bool(prefix) and prefix[-1] == EOS

    def to_json(self) -> dict:
        return {
            "type": "ngram",
            "n": self.n,
            "alpha": self.alpha,
            "vocab": list(self.vocab.tokens),
            "counts": {
                CONTEXT_SEP.join(ctx): {tok: _num(c) for tok, c in sorted(row.items())}
                for ctx, row in sorted(self.counts.items())
            },
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "NGramModel":
        n = int(obj["n"])
        counts = {}
        for key, row in obj["counts"].items():
            ctx = tuple(key.split(CONTEXT_SEP)) if n > 1 else ()
            counts[ctx] = row
        return cls(Vocab(tuple(obj["vocab"])), n, counts, float(obj["alpha"]))


def _num(c):
    return int(c) if float(c).is_integer() else float(c)


def train_ngram(corpus: Sequence[str], n: int, alpha: float = DEFAULT_ALPHA, vocab: Vocab | None = None) -> NGramModel:
    """Count every length-``n`` window of each whitespace-tokenized document.

    Documents are padded with ``n - 1`` BOS tokens and terminated with EOS.
    Pass ``vocab`` to train shard models over a shared alphabet.
    """
    docs = [doc.split() for doc in corpus]
    if not docs:
        raise EmptyDatasetError("cannot train on an empty corpus")
    if n < 1:
        raise InvalidInputError("n-gram order must be at least 1")
    if not alpha > 0:
        raise InvalidInputError("alpha must be > 0; zero smoothing gives disjoint supports")
    if vocab is None:
        vocab = Vocab.from_documents(corpus)
    counts: dict[tuple, Counter] = defaultdict(Counter)
    for toks in docs:
        missing = [t for t in toks if t not in vocab]
        if missing:
            raise InvalidInputError(f"token {missing[0]!r} is not in the vocabulary")
        padded = [BOS] * (n - 1) + toks + [EOS]
        for i in range(n - 1, len(padded)):
            counts[tuple(padded[i - n + 1:i])][padded[i]] += 1
    return NGramModel(vocab, n, counts, alpha)


# --------------------------------------------------------------------------
# explicit tables


class TableModel(ConditionalModel):
    """One-step model: each prompt maps to a stored distribution over outputs.

    Prompts are keyed by their space-joined tokens; the empty prompt is "".
    """

    max_steps = 1

    def __init__(self, table: Mapping[str, Categorical], alphabet: Sequence | None = None):
        if not table:
            raise InvalidInputError("table model needs at least one prompt")
        self.table = {" ".join(as_tokens(k)): v for k, v in table.items()}
        if alphabet is None:
            seen: dict = {}
            for dist in self.table.values():
                for label in dist.labels:
                    seen.setdefault(label, None)
            alphabet = tuple(seen)
        self.vocab = Vocab(tuple(alphabet), markers=False)
        for dist in self.table.values():
            for label in dist.labels:
                if label not in self.vocab and dist.prob(label) > 0:
                    raise InvalidInputError(f"label {label!r} missing from the alphabet")

    @classmethod
    def single(cls, dist: Categorical, alphabet: Sequence | None = None) -> "TableModel":
        return cls({"": dist}, alphabet)

    def context_key(self, prompt: tuple, prefix: tuple) -> str:
        if prefix:
            raise InvalidInputError("table models emit a single output token")
        key = " ".join(prompt)
        if key not in self.table:
            raise InvalidInputError(f"prompt {key!r} not in table")
        return key

    def _probs(self, key) -> np.ndarray:
        dist = self.table[key]
        return np.array([dist.prob(tok) for tok in self.vocab.tokens])

    def is_complete(self, prefix: tuple) -> bool:
        return len(prefix) >= 1

    def to_json(self) -> dict:
        return {
            "type": "table",
            "alphabet": list(self.vocab.tokens),
            "table": {k: v.to_json() for k, v in self.table.items()},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TableModel":
        table = {k: Categorical.from_json(v) for k, v in obj["table"].items()}
        return cls(table, obj.get("alphabet"))


def model_from_json(obj: Mapping) -> ConditionalModel:
    kind = obj.get("type")
    if kind == "ngram":
        return NGramModel.from_json(obj)
    if kind == "table":
        return TableModel.from_json(obj)
    raise InvalidInputError(f"unknown model type {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, sort_keys=True)


def load_model(path) -> ConditionalModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))


# --------------------------------------------------------------------------
# sequence-level operations


def score_sequence(model: ConditionalModel, prompt, y) -> float:
    """``log2 p(y | prompt)`` as the sum of per-token log probabilities."""
    prompt = as_tokens(prompt)
    y = tuple(y)
    total = 0.0
    for t, tok in enumerate(y):
        p = model.token_prob(prompt, y[:t], tok)
        if p <= 0:
            return -math.inf
        total += math.log2(p)
    return total


def sample_sequence(model: ConditionalModel, prompt, rng: np.random.Generator, max_len: int) -> tuple:
    """Draw one output autoregressively; stops at EOS/completion or ``max_len``."""
    prompt = as_tokens(prompt)
    max_len = model.effective_max_len(max_len)
    tokens = model.vocab.tokens
    y: tuple = ()
    while len(y) < max_len:
        cdf = model._next_cdf(prompt, y)
        i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        y = y + (tokens[min(i, len(tokens) - 1)],)
        if model.is_complete(y):
            break
    return y


def _worst_case_count(model: ConditionalModel, max_len: int) -> int:
    v = len(model.vocab)
    return v ** model.effective_max_len(max_len)


def enumerate_sequences(model: ConditionalModel, prompt, max_len: int, cap: int | None = None) -> list:
    """Every positive-probability complete output with its probability.

    Raises EnumerationInfeasibleError when ``|vocab| ** max_len`` exceeds
    ``cap`` (default from ``NAF_ENUM_CAP`` or 10**6).
    """
    if max_len < 1:
        raise InvalidInputError("max_len must be at least 1")
    cap = enum_cap_from_env() if cap is None else cap
    worst = _worst_case_count(model, max_len)
    if worst > cap:
        raise EnumerationInfeasibleError(
            f"|vocab|^max_len = {worst} exceeds the enumeration cap {cap}"
        )
    prompt = as_tokens(prompt)
    max_len = model.effective_max_len(max_len)
    tokens = model.vocab.tokens
    out = []
    stack = [((), 1.0)]
    while stack:
        prefix, mass = stack.pop()
        probs = model.next_probs(prompt, prefix)
        for i in range(len(tokens) - 1, -1, -1):
            p = probs[i]
            if p <= 0:
                continue
            y = prefix + (tokens[i],)
            if model.is_complete(y) or len(y) >= max_len:
                out.append((y, mass * p))
            else:
                stack.append((y, mass * p))
    return out


def sequence_distribution(model: ConditionalModel, prompt, max_len: int, cap: int | None = None) -> Categorical:
    """The full output distribution as a Categorical over token tuples."""
    items = enumerate_sequences(model, prompt, max_len, cap)
    labels = [y for y, _ in items]
    probs = np.array([p for _, p in items])
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-9:
        raise InvalidInputError(f"enumerated mass {total!r} is not 1; the model is not normalized")
    # products of normalized factors drift by ~1e-16 per path
    return Categorical(labels, probs / total)


def incomplete_prefixes(model: ConditionalModel, prompt, max_len: int, cap: int | None = None) -> list:
    """All positive-probability prefixes at which another token is drawn."""
    cap = enum_cap_from_env() if cap is None else cap
    if _worst_case_count(model, max_len) > cap:
        raise EnumerationInfeasibleError("prefix enumeration exceeds the cap")
    prompt = as_tokens(prompt)
    max_len = model.effective_max_len(max_len)
    tokens = model.vocab.tokens
    out = []
    stack = [()]
    while stack:
        prefix = stack.pop()
        out.append(prefix)
        probs = model.next_probs(prompt, prefix)
        for i, p in enumerate(probs):
            y = prefix + (tokens[i],)
            if p > 0 and not model.is_complete(y) and len(y) < max_len:
                stack.append(y)
    return out


@dataclass(frozen=True)
class SequenceDist:
    """A model together with the output length cap that makes Y finite."""

    model: ConditionalModel
    max_len: int

    def score(self, prompt, y) -> float:
        return score_sequence(self.model, prompt, y)

    def sample(self, prompt, rng) -> tuple:
        return sample_sequence(self.model, prompt, rng, self.max_len)

    def enumerate(self, prompt, cap=None) -> list:
        return enumerate_sequences(self.model, prompt, self.max_len, cap)

    def distribution(self, prompt, cap=None) -> Categorical:
        return sequence_distribution(self.model, prompt, self.max_len, cap)
