"""Finite categorical distributions and the divergences used for NAF bounds.

All logarithms are base 2, so every divergence is measured in bits.  A bit
value is a plain ``float``; ``math.inf`` is a legitimate state (support
violation) and NaN never is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, NoOverlapError

NORMALIZATION_TOL = 1e-12

Bits = float


def bits_to_json(value: Bits):
    if math.isnan(value):
        raise InvalidInputError("NaN is not a valid bit value")
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def bits_from_json(value) -> Bits:
    if isinstance(value, str):
        if value == "inf":
            return math.inf
        if value == "-inf":
            return -math.inf
        raise InvalidInputError(f"cannot parse bit value {value!r}")
    return float(value)


def _check_labels(labels: Sequence[Hashable]) -> tuple:
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise InvalidInputError("labels must be unique")
    return labels


@dataclass(frozen=True, eq=False)
class Categorical:
    """A probability vector over an ordered tuple of distinct labels.

    Construction rejects inputs whose total mass is off by more than
    ``NORMALIZATION_TOL`` instead of silently renormalizing them.
    """

    labels: tuple
    probs: np.ndarray

    def __init__(self, labels: Iterable[Hashable], probs: Iterable[float]):
        labels = _check_labels(labels)
        arr = np.array(list(probs) if not isinstance(probs, np.ndarray) else probs, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != len(labels):
            raise InvalidInputError("labels and probs must have the same length")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidInputError("probabilities must be finite and non-negative")
        total = math.fsum(arr)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
        arr.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", arr)

    @classmethod
    def from_mapping(cls, mapping: Mapping[Hashable, float]) -> "Categorical":
        return cls(list(mapping.keys()), list(mapping.values()))

    @classmethod
    def point(cls, label: Hashable) -> "Categorical":
        return cls([label], [1.0])

    @cached_property
    def index(self) -> dict:
        return {label: i for i, label in enumerate(self.labels)}

    def prob(self, label: Hashable) -> float:
        i = self.index.get(label)
        return 0.0 if i is None else float(self.probs[i])

    def __getitem__(self, label: Hashable) -> float:
        return self.prob(label)

    def __len__(self) -> int:
        return len(self.labels)

    def support(self) -> tuple:
        return tuple(label for label, p in zip(self.labels, self.probs) if p > 0)

    def as_dict(self) -> dict:
        return {label: float(p) for label, p in zip(self.labels, self.probs)}

    def mass(self, labels: Iterable[Hashable]) -> float:
        return math.fsum(self.prob(label) for label in set(labels))

    def allclose(self, other: "Categorical", atol: float = 1e-12) -> bool:
        _, a, b = align(self, other)
        return bool(np.all(np.abs(a - b) <= atol))

    def to_json(self) -> dict:
        return {"labels": [_label_to_json(x) for x in self.labels], "probs": [float(p) for p in self.probs]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Categorical":
        return cls([_label_from_json(x) for x in obj["labels"]], obj["probs"])

    def __repr__(self) -> str:
        body = ", ".join(f"{label!r}: {p:.6g}" for label, p in zip(self.labels, self.probs))
        return f"Categorical({{{body}}})"


def _label_to_json(label):
    # sequence labels are tuples of tokens; JSON has no tuples
    return list(label) if isinstance(label, tuple) else label


def _label_from_json(label):
    return tuple(label) if isinstance(label, list) else label


@dataclass(frozen=True)
class UnnormalizedWeights:
    labels: tuple
    weights: tuple

    def __init__(self, labels: Iterable[Hashable], weights: Iterable[float]):
        labels = _check_labels(labels)
        weights = tuple(float(w) for w in weights)
        if len(weights) != len(labels):
            raise InvalidInputError("labels and weights must have the same length")
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise InvalidInputError("weights must be finite and non-negative")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)


def renormalize(w: UnnormalizedWeights, min_mass: float = 0.0) -> tuple[Categorical, float]:
    """Divide weights by their total ``Z`` and return ``(distribution, Z)``.

    Raises NoOverlapError when ``Z <= min_mass``; with ``min_mass=0`` that
    is exactly the all-zero case.
    """
    z = math.fsum(w.weights)
    if z <= min_mass:
        raise NoOverlapError(f"total weight {z!r} leaves nothing to renormalize")
    probs = np.array(w.weights, dtype=np.float64) / z
    # drift from the division is far below the construction tolerance
    return Categorical(w.labels, probs), z


def align(p: Categorical, q: Categorical) -> tuple[tuple, np.ndarray, np.ndarray]:
    """Put ``p`` and ``q`` on the union alphabet, absent labels getting 0."""
    if p.labels == q.labels:
        return p.labels, np.asarray(p.probs), np.asarray(q.probs)
    labels = list(p.labels)
    seen = p.index
    for label in q.labels:
        if label not in seen:
            labels.append(label)
    a = np.zeros(len(labels))
    a[: len(p.labels)] = p.probs
    b = np.array([q.prob(label) for label in labels])
    return tuple(labels), a, b


def align_many(dists: Sequence[Categorical]) -> tuple[tuple, np.ndarray]:
    """Stack several distributions on their union alphabet, one row each."""
    if not dists:
        raise InvalidInputError("need at least one distribution")
    first = dists[0].labels
    if all(d.labels == first for d in dists):
        return first, np.vstack([d.probs for d in dists])
    labels: list = []
    seen: set = set()
    for d in dists:
        for label in d.labels:
            if label not in seen:
                seen.add(label)
                labels.append(label)
    rows = np.array([[d.prob(label) for label in labels] for d in dists])
    return tuple(labels), rows


def tv(p: Categorical, q: Categorical) -> float:
    _, a, b = align(p, q)
    return min(1.0, 0.5 * math.fsum(np.abs(a - b)))


def hellinger_sq(p: Categorical, q: Categorical) -> float:
    _, a, b = align(p, q)
    return min(1.0, max(0.0, 1.0 - math.fsum(np.sqrt(a * b))))


def kl(p: Categorical, q: Categorical) -> Bits:
    _, a, b = align(p, q)
    on = a > 0
    if np.any(b[on] == 0):
        return math.inf
    terms = a[on] * (np.log2(a[on]) - np.log2(b[on]))
    return max(0.0, math.fsum(terms))


def dmax(p: Categorical, q: Categorical) -> Bits:
    """Order-infinity Renyi divergence: worst log ratio over Supp(p)."""
    _, a, b = align(p, q)
    on = a > 0
    if np.any(b[on] == 0):
        return math.inf
    return max(0.0, float(np.max(np.log2(a[on]) - np.log2(b[on]))))


def log_ratios(p: Categorical, q: Categorical) -> dict:
    """``log2 p(y)/q(y)`` for every ``y`` in Supp(p)."""
    labels, a, b = align(p, q)
    out = {}
    for label, x, y in zip(labels, a, b):
        if x > 0:
            out[label] = math.inf if y == 0 else math.log2(x) - math.log2(y)
    return out
