"""Datasets, deduplication, shard planning and safe-model covers.

A datapoint carries the set of copyrighted-work tags it accesses.  Exact
duplicate documents (after trimming) are always kept in the same shard, so
a tag's multiplicity counts distinct documents, not copies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyDatasetError, InvalidInputError, MultiplicityError, ShardPlanError
from .models import DEFAULT_ALPHA, ConditionalModel, Vocab, train_ngram


@dataclass(frozen=True)
class Datapoint:
    doc: str
    tags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "tags", frozenset(self.tags))

    @property
    def key(self) -> str:
        return self.doc.strip()


@dataclass(frozen=True)
class Dataset:
    datapoints: tuple

    def __init__(self, datapoints: Iterable[Datapoint]):
        object.__setattr__(self, "datapoints", tuple(datapoints))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "Dataset":
        return cls(Datapoint(doc, frozenset(tags)) for doc, tags in pairs)

    def __len__(self) -> int:
        return len(self.datapoints)

    def __iter__(self):
        return iter(self.datapoints)

    def __getitem__(self, i) -> Datapoint:
        return self.datapoints[i]

    @property
    def docs(self) -> list:
        return [z.doc for z in self.datapoints]

    def tag_universe(self) -> list:
        return sorted({t for z in self.datapoints for t in z.tags})

    def vocab(self) -> Vocab:
        return Vocab.from_documents(self.docs)

    def without(self, tag) -> "Dataset":
        return Dataset(z for z in self.datapoints if tag not in z.tags)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.datapoints[i] for i in indices)


def load_dataset(path) -> Dataset:
    """Read JSON lines of ``{"doc": ..., "tags": [...]}``; blank lines are skipped."""
    points = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or not isinstance(obj.get("doc"), str):
                raise InvalidInputError(f"{path}: line {lineno}: expected an object with a string 'doc'")
            tags = obj.get("tags", [])
            if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
                raise InvalidInputError(f"{path}: line {lineno}: 'tags' must be a list of strings")
            points.append(Datapoint(obj["doc"], frozenset(tags)))
    return Dataset(points)


def save_dataset(d: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for z in d:
            fh.write(json.dumps({"doc": z.doc, "tags": sorted(z.tags)}) + "\n")


def deduplicate(d: Dataset) -> Dataset:
    """Collapse exact duplicates (trimmed text) into one datapoint with the union of tags."""
    order: dict[str, int] = {}
    docs: list[str] = []
    tags: list[set] = []
    for z in d:
        i = order.get(z.key)
        if i is None:
            order[z.key] = len(docs)
            docs.append(z.doc)
            tags.append(set(z.tags))
        else:
            tags[i] |= z.tags
    return Dataset(Datapoint(doc, frozenset(t)) for doc, t in zip(docs, tags))


def _groups(d: Dataset) -> list[tuple[list[int], frozenset]]:
    by_key: dict[str, int] = {}
    groups: list[tuple[list[int], set]] = []
    for i, z in enumerate(d):
        g = by_key.get(z.key)
        if g is None:
            by_key[z.key] = len(groups)
            groups.append(([i], set(z.tags)))
        else:
            groups[g][0].append(i)
            groups[g][1].update(z.tags)
    return [(idx, frozenset(t)) for idx, t in groups]


def tag_multiplicity(d: Dataset) -> dict:
    """Number of distinct (trimmed) documents accessing each tag."""
    counts: dict = {}
    for _, tags in _groups(d):
        for t in tags:
            counts[t] = counts.get(t, 0) + 1
    return counts


@dataclass(frozen=True)
class ShardPlan:
    num_shards: int
    assignment: tuple

    def shard_indices(self, i: int) -> list:
        return [j for j, s in enumerate(self.assignment) if s == i]

    def shards_with(self, d: Dataset, tag) -> set:
        return {s for z, s in zip(d, self.assignment) if tag in z.tags}

    def validate(self, d: Dataset) -> None:
        if len(self.assignment) != len(d):
            raise ShardPlanError("plan does not cover every datapoint exactly once")
        if any(not 0 <= s < self.num_shards for s in self.assignment):
            raise ShardPlanError("assignment refers to a shard that does not exist")
        for tag in d.tag_universe():
            if len(self.shards_with(d, tag)) >= self.num_shards:
                raise ShardPlanError(f"every shard contains tag {tag!r}")

    def to_json(self) -> dict:
        return {"num_shards": self.num_shards, "assignment": list(self.assignment)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ShardPlan":
        return cls(int(obj["num_shards"]), tuple(int(s) for s in obj["assignment"]))


def plan_shards(d: Dataset, m: int, seed: int = 0) -> ShardPlan:
    """Partition ``d`` into ``m + 1`` disjoint shards, each tag missing from at least one.

    Tagged document groups are placed first on the least-loaded shard that
    keeps every one of their tags inside at most ``m`` shards; untagged
    groups then fill the shards in seeded order, least-loaded first.
    """
    if m < 1:
        raise InvalidInputError("m must be at least 1")
    for tag, mult in sorted(tag_multiplicity(d).items()):
        if mult > m:
            raise MultiplicityError(tag, mult, m)
    k = m + 1
    groups = _groups(d)
    load = [0] * k
    shards_of: dict = {}
    assignment = [-1] * len(d)

    def put(indices, s):
        for i in indices:
            assignment[i] = s
        load[s] += len(indices)

    for indices, tags in groups:
        if not tags:
            continue
        allowed = [
            s for s in range(k)
            if all(s in shards_of.get(t, ()) or len(shards_of.get(t, ())) < m for t in tags)
        ]
        if not allowed:
            raise ShardPlanError(f"no shard can take document {indices[0]} without exposing one of {sorted(tags)}")
        s = min(allowed, key=lambda s: (load[s], s))
        put(indices, s)
        for t in tags:
            shards_of.setdefault(t, set()).add(s)

    untagged = [g for g in groups if not g[1]]
    order = np.random.default_rng(seed).permutation(len(untagged))
    for j in order:
        indices, _ = untagged[int(j)]
        put(indices, min(range(k), key=lambda s: (load[s], s)))

    plan = ShardPlan(k, tuple(assignment))
    plan.validate(d)
    return plan


Trainer = Callable[[Sequence[str], Vocab], ConditionalModel]


@dataclass(frozen=True)
class NGramTrainer:
    """The learning algorithm used for every shard: an add-alpha n-gram."""

    n: int = 2
    alpha: float = DEFAULT_ALPHA

    def __call__(self, docs: Sequence[str], vocab: Vocab) -> ConditionalModel:
        return train_ngram(docs, self.n, self.alpha, vocab=vocab)


@dataclass(frozen=True)
class SafeCover:
    models: tuple
    safe_index: Mapping

    def __init__(self, models: Sequence[ConditionalModel], safe_index: Mapping):
        object.__setattr__(self, "models", tuple(models))
        object.__setattr__(self, "safe_index", dict(safe_index))
        for tag, i in self.safe_index.items():
            if not 0 <= i < len(self.models):
                raise InvalidInputError(f"safe index for {tag!r} out of range")

    def safe(self, tag) -> ConditionalModel:
        return self.models[self.safe_index[tag]]

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)


def build_safe_cover(d: Dataset, plan: ShardPlan, trainer: Trainer | None = None, vocab: Vocab | None = None) -> SafeCover:
    """Train one model per shard and map each tag to the first shard that lacks it."""
    plan.validate(d)
    trainer = NGramTrainer() if trainer is None else trainer
    vocab = d.vocab() if vocab is None else vocab
    models = []
    for i in range(plan.num_shards):
        idx = plan.shard_indices(i)
        if not idx:
            raise EmptyDatasetError(f"shard {i} is empty; use fewer shards or more data")
        models.append(trainer(d.subset(idx).docs, vocab))
    safe_index = {}
    for tag in d.tag_universe():
        present = plan.shards_with(d, tag)
        safe_index[tag] = min(i for i in range(plan.num_shards) if i not in present)
    return SafeCover(models, safe_index)


def leave_one_out(d: Dataset, tag, trainer: Trainer | None = None, vocab: Vocab | None = None) -> ConditionalModel:
    """Retrain on ``d`` with every datapoint accessing ``tag`` removed."""
    trainer = NGramTrainer() if trainer is None else trainer
    vocab = d.vocab() if vocab is None else vocab
    rest = d.without(tag)
    if len(rest) == 0:
        raise EmptyDatasetError(f"removing {tag!r} leaves no training data")
    return trainer(rest.docs, vocab)
