"""Acceptance gate: one printed PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in the terminal summary under "acceptance criteria".
"""

import time
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import ACCEPTANCE_LINES
from naf.cli import main as cli_main
from naf.cp_delta import Divergence, combine_next, cp_delta_model
from naf.cp_k import (
    CPkSampler,
    Variant,
    cpk_distribution,
    dx_from_dists,
    efficiency_bound,
    estimate_nu,
    exact_nu,
    k_tilde,
    log_ratio_percentile,
)
from naf.demo import INJECTED, load_demo
from naf.dist import dmax, hellinger_sq, kl, tv
from naf.fixtures import worked_example, random_instance, random_pair
from naf.models import EOS, TableModel, as_tokens, sample_sequence, score_sequence, sequence_distribution
from naf.oracle import (
    CORRUPTIBLE,
    SuiteConfig,
    claimed_cp_delta_bound,
    materialize,
    random_events,
    verify_degradation,
    verify_event_bound_kl,
    verify_naf,
    verify_suite,
)
from naf.sharding import NGramTrainer, build_safe_cover, plan_shards

EXACT = 1e-12
BITS = 1e-9


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def instances(count: int, salt: int):
    for seed in range(count):
        rng = np.random.default_rng([seed, salt])
        yield seed, random_instance(rng, int(rng.integers(1, 4)))


def test_01_worked_example():
    start = time.perf_counter()
    ex = worked_example()
    mx = combine_next([ex.q1, ex.q2], Divergence.MAX)
    gm = combine_next([ex.q1, ex.q2], Divergence.KL)
    checks = {
        "TV": abs(tv(ex.q1, ex.q2) - 0.5),
        "H2": abs(hellinger_sq(ex.q1, ex.q2) - 0.5),
        "max output": float(np.max(np.abs(mx.dist.probs - [ex.q.prob(y) for y in mx.dist.labels]))),
        "kl output": float(np.max(np.abs(gm.dist.probs - [ex.q.prob(y) for y in gm.dist.labels]))),
        "Dmax(q,qi)": max(abs(dmax(ex.q, q) - 1.0) for q in (ex.q1, ex.q2)),
        "KL(q,qi)": max(abs(kl(ex.q, q) - 1.0) for q in (ex.q1, ex.q2)),
        "max bound tight": abs(mx.k_bound - dmax(mx.dist, ex.q1)),
        "kl bound 2 bits": abs(gm.k_bound - 2.0),
    }
    elapsed = time.perf_counter() - start
    worst = max(checks.values())
    passed = worst <= EXACT and elapsed < 1.0
    record(1, "worked example constants", passed, f"max error {worst:.1e}, {elapsed:.3f}s")
    assert passed, checks


def test_02_partition_identities():
    start = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(2)
    for _ in range(1000):
        p, q = random_pair(rng, int(rng.integers(2, 65)))
        worst = max(worst,
                    abs(combine_next([p, q], Divergence.MAX).z - (1 - tv(p, q))),
                    abs(combine_next([p, q], Divergence.KL).z - (1 - hellinger_sq(p, q))))
    elapsed = time.perf_counter() - start
    passed = worst < EXACT and elapsed < 5.0
    record(2, "partition identities on 1000 pairs", passed, f"max |error| {worst:.1e}, {elapsed:.2f}s")
    assert passed


def test_03_naf_inequalities():
    start = time.perf_counter()
    failures, cases, ms = [], 0, Counter()
    for seed, inst in instances(200, 3):
        ms[inst.m] += 1
        for div in Divergence:
            model = cp_delta_model(inst.cover, div)
            bound = claimed_cp_delta_bound(model, (), inst.max_len)
            rec = verify_naf(model, inst.cover, (), bound, inst.max_len, div)
            cases += 1
            if not rec.passed:
                failures.append((seed, div.value, rec.measured_k, bound))
        rng = np.random.default_rng([seed, 33])
        for variant in Variant:
            k = float(rng.uniform(0, 3))
            s = CPkSampler(inst.base, inst.cover, k, variant, max_len=inst.max_len)
            nu = exact_nu(s, ())
            if nu == 0:
                continue
            rec = verify_naf(s, inst.cover, (), k_tilde(k, nu), inst.max_len)
            cases += 1
            if not rec.passed:
                failures.append((seed, variant.value, rec.measured_k, k_tilde(k, nu)))
    elapsed = time.perf_counter() - start
    passed = not failures and elapsed < 30.0 and set(ms) == {1, 2, 3}
    record(3, "NAF inequalities on 200 instances", passed,
           f"{cases} checks, m counts {dict(sorted(ms.items()))}, {len(failures)} failures, {elapsed:.1f}s")
    assert passed, failures[:5]


def test_04_degradation():
    failures, cases = [], 0
    for seed, inst in instances(200, 3):
        for div in Divergence:
            check = verify_degradation(cp_delta_model(inst.cover, div), None, (), inst.max_len)
            cases += 1
            if not check.passed:
                failures.append((seed, div.value, check.measured, check.bound))
        rng = np.random.default_rng([seed, 33])
        for variant in Variant:
            s = CPkSampler(inst.base, inst.cover, float(rng.uniform(0, 3)), variant, max_len=inst.max_len)
            if exact_nu(s, ()) == 0:
                continue
            check = verify_degradation(s)
            cases += 1
            if not check.passed:
                failures.append((seed, variant.value, check.measured, check.bound))
    record(4, "degradation bounds", not failures, f"{cases} checks, {len(failures)} failures")
    assert not failures, failures[:5]


def test_05_efficiency_bounds():
    start = time.perf_counter()
    failures, used, drawn = [], 0, 0
    seed = 0
    while used < 200:
        rng = np.random.default_rng([seed, 5])
        seed += 1
        inst = random_instance(rng, int(rng.integers(1, 4)))
        drawn += 1
        p = sequence_distribution(inst.base, (), inst.max_len)
        d = dx_from_dists(p, [sequence_distribution(q, (), inst.max_len) for q in inst.cover]).d
        if d >= 0.95:
            continue
        used += 1
        k_hard, lo_hard = efficiency_bound(d, Variant.HARD)
        nu_hard = exact_nu(CPkSampler(inst.base, inst.cover, k_hard, Variant.HARD, max_len=inst.max_len), ())
        _, lo_smooth = efficiency_bound(d, Variant.SMOOTH)
        nu_smooth = exact_nu(CPkSampler(inst.base, inst.cover, 0.0, Variant.SMOOTH, max_len=inst.max_len), ())
        grid = np.linspace(0.0, 2 * k_hard + 2, 20)
        mono = True
        for variant in Variant:
            nus = [exact_nu(CPkSampler(inst.base, inst.cover, k, variant, max_len=inst.max_len), ()) for k in grid]
            mono &= all(b >= a - BITS for a, b in zip(nus, nus[1:]))
        if nu_hard < lo_hard - BITS or nu_smooth < lo_smooth - BITS or not mono:
            failures.append((seed - 1, d, nu_hard, lo_hard, nu_smooth, lo_smooth, mono))
    elapsed = time.perf_counter() - start
    record(5, "acceptance-probability lower bounds and monotonicity", not failures,
           f"{used} instances with d < 0.95 of {drawn} drawn, {len(failures)} failures, {elapsed:.1f}s")
    assert not failures, failures[:5]


def test_06_corollary():
    worst = 0.0
    rng = np.random.default_rng(6)
    for _ in range(100):
        p, q = random_pair(rng, int(rng.integers(2, 33)))
        m1, m2 = TableModel.single(p, p.labels), TableModel.single(q, p.labels)
        p_k, _ = cpk_distribution(CPkSampler(m1, (m1, m2), 0.0, Variant.SMOOTH, max_len=1), ())
        ref = combine_next([p, q], Divergence.MAX).dist
        for label in set(ref.labels) | {y[0] for y in p_k.labels}:
            worst = max(worst, abs(p_k.prob((label,)) - ref.prob(label)))
    passed = worst <= EXACT
    record(6, "smooth threshold 0 equals the min combination", passed, f"max entry error {worst:.1e} on 100 pairs")
    assert passed


def test_07_sampler_law():
    start = time.perf_counter()
    pvalues = []
    toys, seed = [], 0
    # toys need a usable acceptance rate for 1e5 draws
    while len(toys) < 10:
        i = len(toys)
        rng = np.random.default_rng([seed, 7])
        seed += 1
        inst = random_instance(rng, int(rng.integers(1, 4)), "table" if i % 2 == 0 else "ngram")
        variant = Variant.HARD if i < 5 else Variant.SMOOTH
        s = CPkSampler(inst.base, inst.cover, float(rng.uniform(0.2, 2.0)), variant, max_len=inst.max_len)
        if exact_nu(s, ()) >= 0.05:
            toys.append(s)
    for i, s in enumerate(toys):
        p_k, _ = cpk_distribution(s, ())
        draw = np.random.default_rng([i, 77])
        counts = Counter(s.sample((), draw).tokens for _ in range(100_000))
        expected = p_k.probs * 100_000
        observed = np.array([counts.get(y, 0) for y in p_k.labels], dtype=float)
        assert sum(counts.values()) == observed.sum()
        # outputs the sampler must never emit
        assert observed[expected == 0].sum() == 0
        expected, observed = expected[expected > 0], observed[expected > 0]
        # pool sparse cells so the chi-square approximation holds
        order = np.argsort(expected)
        small = expected[order] < 5
        if small.any():
            e = np.append(expected[order][~small], expected[order][small].sum())
            o = np.append(observed[order][~small], observed[order][small].sum())
        else:
            e, o = expected, observed
        pvalues.append(float(chisquare(o, e).pvalue) if len(e) > 1 else 1.0)
    elapsed = time.perf_counter() - start
    passed = min(pvalues) > 0.001 and elapsed < 60.0
    record(7, "sampler output law (chi-square)", passed,
           f"min p-value {min(pvalues):.3g} over 10 toys x 1e5 samples, {elapsed:.1f}s")
    assert passed, pvalues


def test_08_desk_memorization():
    start = time.perf_counter()
    data = load_demo()
    trainer = NGramTrainer(2, 0.1)
    plan = plan_shards(data, 1)
    vocab = data.vocab()
    cover = build_safe_cover(data, plan, trainer, vocab)
    p = trainer(data.docs, vocab)
    max_len = 32
    k, _ = log_ratio_percentile(p, cover, (), 10_000, 95, np.random.default_rng([8, 0]), max_len)
    targets = {tag: as_tokens(s) + (EOS,) for tag, s in INJECTED.items()}

    rng = np.random.default_rng([8, 1])
    base_counts = Counter(sample_sequence(p, (), rng, max_len) for _ in range(10_000))
    base_rates = {tag: base_counts[y] / 10_000 for tag, y in targets.items()}

    s = CPkSampler(p, cover, k, Variant.HARD, max_len=max_len)
    rng = np.random.default_rng([8, 2])
    protected = Counter(s.sample((), rng).tokens for _ in range(10_000))
    protected_hits = {tag: protected[y] for tag, y in targets.items()}

    stats = estimate_nu(s, (), 10_000, np.random.default_rng([8, 3]))
    kt = k_tilde(k, stats.nu_hat)
    kt_conservative = k_tilde(k, stats.ci_low)
    # exact scores: p_k(y) = p(y) accept(y) / nu against the tag's safe model
    bound_ok = True
    margins = {}
    for tag, y in targets.items():
        safe = cover.safe(tag)
        p_k = 2.0 ** score_sequence(p, (), y) * s.accept_prob((), y) / stats.nu_hat
        rhs = 2.0 ** (kt + score_sequence(safe, (), y))
        margins[tag] = rhs - p_k
        bound_ok &= p_k <= rhs
    for y in protected:
        p_k = 2.0 ** score_sequence(p, (), y) * s.accept_prob((), y) / stats.ci_low
        for q in cover:
            bound_ok &= p_k <= 2.0 ** (kt_conservative + score_sequence(q, (), y)) * (1 + 1e-12)
    elapsed = time.perf_counter() - start
    passed = (
        len(data) == 200
        and len(vocab) <= 50
        and all(r >= 0.01 for r in base_rates.values())
        and all(c == 0 for c in protected_hits.values())
        and bound_ok
        and elapsed < 120.0
    )
    detail = (
        f"full-model rates {', '.join(f'{t} {r:.2%}' for t, r in base_rates.items())}; "
        f"protected hits {protected_hits}; k {k:.2f}, nu {stats.nu_hat:.3f}, k_tilde {kt:.3f}; {elapsed:.1f}s"
    )
    record(8, "desk-scale memorization analog", passed, detail)
    assert passed, detail


def test_09_k_tilde_reference():
    value = k_tilde(500, 0.965)
    passed = value < 501
    record(9, "k_tilde(500, 0.965) < 501", passed, f"k_tilde = {value:.6f}")
    assert passed


def test_10_negative_controls():
    outcomes = {}
    for name in sorted(CORRUPTIBLE):
        report = verify_suite(SuiteConfig(seeds=list(range(20)), corrupt=name))
        outcomes[name] = not report.passed and all(c.lemma in report.summary() for c in report.failures)
    exit_codes = {name: cli_main(["verify", "--corrupt", name, "--seeds", "5"]) for name in sorted(CORRUPTIBLE)}
    clean = cli_main(["verify", "--seeds", "10"])
    passed = all(outcomes.values()) and all(c == 1 for c in exit_codes.values()) and clean == 0
    record(10, "negative controls fail, clean suite passes", passed,
           f"{sum(outcomes.values())}/{len(outcomes)} corrupted fixtures caught, exit codes {sorted(set(exit_codes.values()))}, clean exit {clean}")
    assert passed, (outcomes, exit_codes)


def test_11_concentrated_kl_event_bound():
    failures, cases, instances_used = [], 0, 0
    for seed, inst in instances(20, 11):
        rng = np.random.default_rng([seed, 111])
        model = cp_delta_model(inst.cover, Divergence.KL)
        pd = materialize(model, (), inst.max_len)
        instances_used += 1
        for q in inst.cover:
            for e in random_events(rng, pd.labels, 100):
                check = verify_event_bound_kl(pd, q, (), e, inst.max_len)
                cases += 1
                if not check.passed:
                    failures.append((seed, e.name, check.worst_epsilon, check.worst_slack))
    record(11, "concentrated-KL event bound on the exact frontier", not failures,
           f"{instances_used} instances, {cases} event checks, {len(failures)} failures")
    assert not failures, failures[:5]


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
