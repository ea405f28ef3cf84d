import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from naf.dist import Categorical
from naf.errors import EmptyDatasetError, EnumerationInfeasibleError, InvalidInputError
from naf.models import (
    BOS,
    EOS,
    UNK,
    NGramModel,
    SequenceDist,
    TableModel,
    Vocab,
    enumerate_sequences,
    incomplete_prefixes,
    load_model,
    save_model,
    score_sequence,
    sample_sequence,
    sequence_distribution,
    train_ngram,
)

AB = Vocab((BOS, EOS, "a", "b"))


def test_bigram_hand_count():
    m = train_ngram(["a b"], 2, alpha=1.0, vocab=AB)
    # one "a b" window; denominator 1 + 4 pseudo-counts
    assert m.token_prob((), ("a",), "b") == pytest.approx(0.4, abs=1e-15)
    assert m.token_prob((), ("a",), "a") == pytest.approx(0.2, abs=1e-15)
    assert m.token_prob((), (), "a") == pytest.approx(0.4, abs=1e-15)


def test_unigram_large_alpha_is_near_uniform():
    m = train_ngram(["a"], 1, alpha=1e9)
    probs = m.next_probs()
    assert np.allclose(probs, 1 / len(m.vocab), atol=1e-8)


def test_unseen_context_is_uniform():
    m = train_ngram(["a b"], 3, alpha=0.5, vocab=AB)
    assert np.allclose(m.next_probs((), ("b", "b")), 0.25)


def test_unknown_context_token_maps_to_unk():
    m = train_ngram(["a b"], 2, alpha=0.5, vocab=AB)
    assert m.context_key(("zzz",), ()) == (UNK,)
    assert np.allclose(m.next_probs(("zzz",), ()), 0.25)


def test_identical_shards_identical_models():
    a = train_ngram(["a b a", "b"], 2, 0.3, vocab=AB)
    b = train_ngram(["a b a", "b"], 2, 0.3, vocab=AB)
    for ctx in [(), ("a",), ("b",), ("a", "b")]:
        assert np.array_equal(a.next_probs((), ctx), b.next_probs((), ctx))


def test_training_errors():
    with pytest.raises(EmptyDatasetError):
        train_ngram([], 2)
    with pytest.raises(InvalidInputError):
        train_ngram(["a"], 2, alpha=0.0)
    with pytest.raises(InvalidInputError):
        train_ngram(["a"], 0)
    with pytest.raises(InvalidInputError):
        train_ngram(["c"], 2, vocab=AB)
    with pytest.raises(InvalidInputError):
        Vocab(("a", "b"))
    with pytest.raises(InvalidInputError):
        Vocab((BOS, EOS, UNK))


def test_vocab_order():
    v = Vocab.from_documents(["b a", "c"])
    assert v.tokens == (BOS, EOS, "a", "b", "c")


def test_table_model_lookup():
    d = Categorical(["x", "y"], [0.3, 0.7])
    m = TableModel({"hi": d, "": Categorical.point("x")})
    assert m.next_token_dist(("hi",)).allclose(d)
    assert score_sequence(m, "hi", ("y",)) == pytest.approx(math.log2(0.7))
    with pytest.raises(InvalidInputError):
        m.next_probs(("nope",))


def test_score_single_eos():
    m = train_ngram(["a b"], 2, 1.0, vocab=AB)
    assert score_sequence(m, (), (EOS,)) == pytest.approx(math.log2(m.token_prob((), (), EOS)))


def test_score_matches_product():
    m = train_ngram(["a b", "b b a"], 2, 0.2, vocab=AB)
    y = ("b", "a", "b", EOS)
    prod = 1.0
    for t, tok in enumerate(y):
        prod *= m.next_token_dist((), y[:t]).prob(tok)
    assert score_sequence(m, (), y) == pytest.approx(math.log2(prod), abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(0.05, 2.0))
@settings(max_examples=40, deadline=None)
def test_enumeration_sums_to_one(seed, max_len, alpha):
    rng = np.random.default_rng(seed)
    docs = [" ".join(rng.choice(["a", "b"], size=rng.integers(1, 4))) for _ in range(3)]
    m = train_ngram(docs, 2, alpha, vocab=AB)
    items = enumerate_sequences(m, (), max_len)
    assert math.fsum(p for _, p in items) == pytest.approx(1.0, abs=1e-12)
    for y, p in items:
        assert y[-1] == EOS or len(y) == max_len
        assert 2.0 ** score_sequence(m, (), y) == pytest.approx(p, rel=1e-9)


def test_enumeration_cap(monkeypatch):
    m = train_ngram(["a b"], 2, 1.0, vocab=AB)
    with pytest.raises(EnumerationInfeasibleError):
        enumerate_sequences(m, (), 10, cap=1000)
    monkeypatch.setenv("NAF_ENUM_CAP", "10")
    with pytest.raises(EnumerationInfeasibleError):
        sequence_distribution(m, (), 2)
    monkeypatch.setenv("NAF_ENUM_CAP", "16")
    assert len(sequence_distribution(m, (), 2)) > 0


def test_sampling_terminates_and_matches_law():
    m = train_ngram(["a b", "b"], 2, 0.5, vocab=AB)
    rng = np.random.default_rng(0)
    law = sequence_distribution(m, (), 3)
    n = 20_000
    counts = {}
    for _ in range(n):
        y = sample_sequence(m, (), rng, 3)
        assert y[-1] == EOS or len(y) == 3
        counts[y] = counts.get(y, 0) + 1
    for y, c in counts.items():
        assert abs(c / n - law.prob(y)) < 5 * math.sqrt(law.prob(y) / n) + 1e-3


def test_sampling_is_seeded():
    m = train_ngram(["a b", "b"], 2, 0.5, vocab=AB)
    a = [sample_sequence(m, (), np.random.default_rng(7), 5) for _ in range(3)]
    b = [sample_sequence(m, (), np.random.default_rng(7), 5) for _ in range(3)]
    assert a == b


def test_incomplete_prefixes():
    m = train_ngram(["a"], 2, 1.0, vocab=AB)
    prefixes = incomplete_prefixes(m, (), 2)
    # root plus the three non-EOS first tokens
    assert sorted(prefixes) == sorted([(), (BOS,), ("a",), ("b",)])


def test_sequence_dist_wrapper():
    m = train_ngram(["a"], 2, 1.0, vocab=AB)
    s = SequenceDist(m, 2)
    assert s.distribution(()).labels == sequence_distribution(m, (), 2).labels
    assert len(s.enumerate(())) == len(s.distribution(()))


def test_save_load_round_trip(tmp_path):
    m = train_ngram(["a b", "b a b"], 2, 0.25, vocab=AB)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert isinstance(back, NGramModel)
    for ctx in [(), ("a",), ("b",)]:
        assert np.array_equal(back.next_probs((), ctx), m.next_probs((), ctx))
    t = TableModel.single(Categorical(["x", "y"], [0.2, 0.8]), ("x", "y", "z"))
    save_model(t, tmp_path / "t.json")
    assert np.array_equal(load_model(tmp_path / "t.json").next_probs(), t.next_probs())
