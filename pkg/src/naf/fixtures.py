"""Deterministic instance generators for the brute-force checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import Categorical
from .models import BOS, EOS, ConditionalModel, NGramModel, TableModel, Vocab


@dataclass(frozen=True)
class WorkedExample:
    """Two shards, each memorizing a different work half the time."""

    q: Categorical
    q1: Categorical
    q2: Categorical
    alphabet: tuple

    @property
    def models(self) -> tuple:
        return TableModel.single(self.q1, self.alphabet), TableModel.single(self.q2, self.alphabet)


def worked_example() -> WorkedExample:
    q = Categorical(["a", "b"], [0.5, 0.5])
    q1 = Categorical(["C1", "a", "b"], [0.5, 0.25, 0.25])
    q2 = Categorical(["C2", "a", "b"], [0.5, 0.25, 0.25])
    return WorkedExample(q, q1, q2, ("C1", "C2", "a", "b"))


def spiked_pair(size: int = 12, spike: float = 0.5, seed: int = 0) -> tuple[Categorical, Categorical]:
    """Two distributions sharing a smooth body, each with its own spike."""
    rng = np.random.default_rng(seed)
    body = rng.dirichlet(np.full(size, 4.0))
    labels = [f"y{i}" for i in range(size)]
    q1 = Categorical(labels + ["C1"], np.append((1 - spike) * body, spike))
    noisy = rng.dirichlet(body * 200 + 1e-3)
    q2 = Categorical(labels + ["C2"], np.append((1 - spike) * noisy, spike))
    return q1, q2


def random_categorical(rng: np.random.Generator, size: int, labels=None, zero_prob: float = 0.0) -> Categorical:
    labels = [f"s{i}" for i in range(size)] if labels is None else list(labels)
    w = rng.dirichlet(np.full(size, rng.uniform(0.3, 3.0)))
    if zero_prob > 0:
        mask = rng.random(size) < zero_prob
        if mask.all():
            mask[rng.integers(size)] = False
        w = np.where(mask, 0.0, w)
        w = w / w.sum()
    return Categorical(labels, w)


def random_pair(rng: np.random.Generator, size: int) -> tuple[Categorical, Categorical]:
    zero = rng.choice([0.0, 0.0, 0.3])
    p = random_categorical(rng, size, zero_prob=zero)
    q = random_categorical(rng, size, zero_prob=zero)
    if float(np.minimum(p.probs, q.probs).sum()) <= 1e-9:
        q = random_categorical(rng, size)
    return p, q


def random_sources(rng: np.random.Generator, num: int, size: int) -> list[Categorical]:
    """``num`` shard-like distributions: a shared body plus a private spike each."""
    while True:
        out = _draw_sources(rng, num, size)
        if float(np.vstack([s.probs for s in out]).min(axis=0).sum()) > 1e-6:
            return out


def _draw_sources(rng: np.random.Generator, num: int, size: int) -> list[Categorical]:
    body_labels = [f"s{i}" for i in range(size)]
    spikes = [f"C{i + 1}" for i in range(num)]
    labels = body_labels + spikes
    body = rng.dirichlet(np.full(size, rng.uniform(0.5, 3.0)))
    out = []
    for i in range(num):
        conc = rng.uniform(5.0, 200.0)
        own = rng.dirichlet(body * conc + 1e-2)
        w = np.zeros(len(labels))
        spike = rng.uniform(0.0, 0.6)
        w[:size] = (1 - spike) * own
        w[size + i] = spike
        if rng.random() < 0.3:
            drop = rng.integers(size)
            w[drop] = 0.0
        out.append(Categorical(labels, w / w.sum()))
    return out


def random_base(rng: np.random.Generator, sources: list[Categorical]) -> Categorical:
    """A "full data" model: a noisy mixture of the shards."""
    rows = np.vstack([s.probs for s in sources])
    mix = rng.dirichlet(np.ones(len(sources))) @ rows
    noise = rng.dirichlet(np.ones(rows.shape[1]))
    eps = rng.uniform(0.0, 0.3)
    w = (1 - eps) * mix + eps * noise
    return Categorical(sources[0].labels, w / w.sum())


def random_ngram_family(rng: np.random.Generator, num: int, words: int = 3, max_count: int = 4) -> tuple[list[NGramModel], NGramModel]:
    """Bigram shard models plus the model trained on their pooled counts."""
    vocab = Vocab((BOS, EOS) + tuple(f"w{i}" for i in range(words)))
    alpha = float(rng.uniform(0.05, 1.0))
    contexts = [(BOS,)] + [(f"w{i}",) for i in range(words)]
    shards = []
    for _ in range(num):
        counts = {}
        for ctx in contexts:
            row = {tok: int(rng.integers(0, max_count + 1)) for tok in vocab.tokens if tok != BOS}
            counts[ctx] = row
        shards.append(counts)
    pooled = {}
    for counts in shards:
        for ctx, row in counts.items():
            acc = pooled.setdefault(ctx, {})
            for tok, c in row.items():
                acc[tok] = acc.get(tok, 0) + c
    models = [NGramModel(vocab, 2, c, alpha) for c in shards]
    return models, NGramModel(vocab, 2, pooled, alpha)


@dataclass(frozen=True)
class Instance:
    """A base model and a cover of safe models, all on one alphabet."""

    base: ConditionalModel
    cover: tuple
    max_len: int
    kind: str

    @property
    def m(self) -> int:
        return len(self.cover) - 1


def random_instance(rng: np.random.Generator, m: int, kind: str | None = None) -> Instance:
    kind = kind or ("table" if rng.random() < 0.6 else "ngram")
    if kind == "table":
        size = int(rng.integers(2, 7))
        sources = random_sources(rng, m + 1, size)
        alphabet = sources[0].labels
        base = sources[0] if rng.random() < 0.2 else random_base(rng, sources)
        cover = tuple(TableModel.single(s, alphabet) for s in sources)
        return Instance(TableModel.single(base, alphabet), cover, 1, kind)
    shards, full = random_ngram_family(rng, m + 1, words=int(rng.integers(2, 4)))
    return Instance(full, tuple(shards), 3, kind)
