"""A small tagged corpus in which two sentences are heavily duplicated.

Background sentences are drawn from a fixed template grammar; each injected
sentence uses words that appear nowhere else and is repeated ``copies``
times under its own tag, so a bigram model trained on everything emits it
verbatim with noticeable probability.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .sharding import Datapoint, Dataset, load_dataset

ADJECTIVES = ("small", "old", "red", "quiet", "bright", "tired", "happy", "wet")
NOUNS = ("cat", "dog", "bird", "child", "farmer", "boat", "house", "tree", "river", "garden")
VERBS = ("sees", "likes", "finds", "follows", "watches", "paints", "hears", "leaves")
PLACES = ("near", "behind", "under")

INJECTED = {
    "C1": "violet kraken sings",
    "C2": "golden falcon weeps",
}
DEMO_SEED = 20240601
NUM_BACKGROUND = 180
COPIES = 10


def _background(rng: np.random.Generator) -> str:
    def pick(words):
        return words[int(rng.integers(len(words)))]

    words = ["the", pick(NOUNS)] if rng.random() < 0.5 else ["the", pick(ADJECTIVES), pick(NOUNS)]
    words += [pick(VERBS), "the", pick(NOUNS)]
    if rng.random() < 0.5:
        words += [pick(PLACES), "the", pick(NOUNS)]
    return " ".join(words)


def demo_dataset(seed: int = DEMO_SEED, background: int = NUM_BACKGROUND, copies: int = COPIES) -> Dataset:
    """Background sentences interleaved with ``copies`` tagged copies of each injected one."""
    rng = np.random.default_rng(seed)
    points = [Datapoint(_background(rng)) for _ in range(background)]
    for tag, sentence in INJECTED.items():
        for _ in range(copies):
            points.insert(int(rng.integers(len(points) + 1)), Datapoint(sentence, frozenset([tag])))
    return Dataset(points)


def bundled_demo_path():
    return resources.files("naf") / "data" / "demo.jsonl"


def load_demo() -> Dataset:
    with resources.as_file(bundled_demo_path()) as path:
        return load_dataset(path)
