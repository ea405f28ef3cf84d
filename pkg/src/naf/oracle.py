"""Brute-force checks of every bound on enumerable instances.

Everything here materializes full output distributions and sums exactly, so
a failed inequality (at the 1e-9 tolerance) points at a real bug rather than
sampling noise.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .cp_delta import CombineResult, CPDeltaModel, Divergence, combine_next, cp_delta_model, sequence_k_bound
from .cp_k import CPkSampler, Variant, cpk_distribution, dx_from_dists, efficiency_bound, exact_nu, k_tilde
from .dist import Categorical, align, bits_to_json, dmax, hellinger_sq, kl, log_ratios, tv
from .errors import InvalidInputError
from .fixtures import Instance, random_instance, random_pair, worked_example
from .models import ConditionalModel, TableModel, as_tokens, incomplete_prefixes, sequence_distribution

TOL = 1e-9


def materialize(x, prompt=(), max_len: int = 1, cap: int | None = None) -> Categorical:
    """A Categorical over outputs from a Categorical, a model or a CP-k sampler."""
    if isinstance(x, Categorical):
        return x
    if isinstance(x, CPkSampler):
        return cpk_distribution(x, prompt, cap)[0]
    if isinstance(x, ConditionalModel):
        return sequence_distribution(x, prompt, max_len, cap)
    raise InvalidInputError(f"cannot materialize {type(x).__name__}")


def _models(cover) -> list:
    return list(cover.models) if hasattr(cover, "models") else list(cover)


# --------------------------------------------------------------------------
# near access-freeness


@dataclass
class NafRecord:
    prompt: str
    worst_y: object
    measured_k: float
    claimed_bound: float
    passed: bool
    divergence: str = "max"

    def to_json(self) -> dict:
        d = asdict(self)
        d["measured_k"] = bits_to_json(self.measured_k)
        d["claimed_bound"] = bits_to_json(self.claimed_bound)
        d["worst_y"] = list(self.worst_y) if isinstance(self.worst_y, tuple) else self.worst_y
        return d


@dataclass
class NafReport:
    records: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def add(self, record: NafRecord) -> None:
        self.records.append(record)

    def to_json(self) -> dict:
        return {"passed": self.passed, "records": [r.to_json() for r in self.records]}


def verify_naf(p, cover, prompt=(), claimed_bound: float = 0.0, max_len: int = 1,
               divergence: Divergence = Divergence.MAX, cap: int | None = None) -> NafRecord:
    """Measure ``max_q Delta(p || q)`` exactly and compare with ``claimed_bound``."""
    divergence = Divergence(divergence)
    prompt = as_tokens(prompt)
    pd = materialize(p, prompt, max_len, cap)
    measured, worst = 0.0, None
    for q in _models(cover):
        qd = materialize(q, prompt, max_len, cap)
        if divergence is Divergence.MAX:
            ratios = log_ratios(pd, qd)
            y, value = max(ratios.items(), key=lambda kv: kv[1])
            value = max(0.0, value)
        else:
            value = kl(pd, qd)
            y = max(log_ratios(pd, qd).items(), key=lambda kv: kv[1])[0]
        if worst is None or value > measured:
            measured, worst = value, y
    passed = measured <= claimed_bound + TOL
    return NafRecord(" ".join(prompt), worst, measured, claimed_bound, passed, divergence.value)


def claimed_cp_delta_bound(model: CPDeltaModel, prompt=(), max_len: int = 1, cap: int | None = None) -> float:
    """Largest chain-rule bound over every enumerable output of a token-level combiner."""
    pd = sequence_distribution(model, prompt, max_len, cap)
    return max(sequence_k_bound(model, prompt, y) for y in pd.labels)


def claimed_cpk_bound(s: CPkSampler, prompt=(), cap: int | None = None) -> float:
    return k_tilde(s.k, exact_nu(s, prompt, cap))


# --------------------------------------------------------------------------
# event bounds


@dataclass(frozen=True)
class EventSpec:
    """Outputs in ``labels``, outputs containing ``substring``, or a predicate."""

    labels: frozenset | None = None
    substring: tuple | None = None
    predicate: Callable | None = None
    name: str = "event"

    def contains(self, y) -> bool:
        if self.labels is not None and y in self.labels:
            return True
        if self.substring is not None:
            toks = tuple(y) if isinstance(y, tuple) else (y,)
            n = len(self.substring)
            if any(toks[i:i + n] == self.substring for i in range(len(toks) - n + 1)):
                return True
        if self.predicate is not None and self.predicate(y):
            return True
        return False

    @classmethod
    def of(cls, labels: Iterable, name: str = "event") -> "EventSpec":
        return cls(labels=frozenset(labels), name=name)


def event_mass(d: Categorical, e: EventSpec) -> float:
    return math.fsum(p for y, p in zip(d.labels, d.probs) if e.contains(y))


@dataclass
class EventCheck:
    event: str
    p_mass: float
    safe_masses: list
    k: float
    passed: bool
    margin: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["k"] = bits_to_json(self.k)
        return d


def verify_event_bound(p, safe, prompt=(), e: EventSpec | None = None, k: float = 0.0,
                       max_len: int = 1, cap: int | None = None) -> EventCheck:
    """Check ``p(E) <= 2^k safe(E)`` against every model in ``safe``."""
    if e is None:
        raise InvalidInputError("an event is required")
    prompt = as_tokens(prompt)
    pd = materialize(p, prompt, max_len, cap)
    pm = event_mass(pd, e)
    masses = [event_mass(materialize(q, prompt, max_len, cap), e) for q in _models(safe)]
    scale = math.inf if math.isinf(k) else 2.0 ** k
    margins = [(scale * m if m > 0 else 0.0) - pm for m in masses]
    if math.isinf(k):
        margins = [math.inf if m > 0 or pm == 0 else -pm for m in masses]
    margin = min(margins)
    return EventCheck(e.name, pm, masses, k, margin >= -TOL, margin)


@dataclass
class ConcentrationEstimate:
    epsilon: float
    delta: float
    mean_Y: float


def concentration_frontier(pd: Categorical, safe: Categorical, step: float = 1e-3,
                           max_points: int = 2000) -> tuple[float, list[ConcentrationEstimate]]:
    """Exact ``(eps, delta)`` pairs for ``Y = log2 p(y)/safe(y)``, ``y ~ p``.

    For each grid ``eps`` the smallest valid ``delta`` is the p-mass of outputs
    with ``Y`` outside ``[(1-eps)E[Y], (1+eps)E[Y]]``.  The grid stops at
    ``max_points``; the ``eps`` at which ``delta`` reaches 0 is appended.
    """
    ratios = log_ratios(pd, safe)
    ys = np.array(list(ratios.values()))
    ws = np.array([pd.prob(y) for y in ratios])
    mean = kl(pd, safe)
    if math.isinf(mean):
        return mean, [ConcentrationEstimate(0.0, 0.0, mean)]
    slack = 1e-12
    if mean <= slack:
        off = float(ws[np.abs(ys) > slack].sum())
        return mean, [ConcentrationEstimate(0.0, min(1.0, off), mean)]
    need = np.abs(ys - mean) / mean
    grid = [i * step for i in range(max_points)]
    top = float(need.max())
    if top > grid[-1]:
        grid.append(top)
    frontier = []
    for eps in grid:
        delta = math.fsum(ws[need > eps + slack])
        frontier.append(ConcentrationEstimate(eps, min(1.0, delta), mean))
    return mean, frontier


@dataclass
class KlEventCheck:
    event: str
    k: float
    p_mass: float
    safe_mass: float
    worst_epsilon: float
    worst_slack: float
    passed: bool

    def to_json(self) -> dict:
        d = asdict(self)
        d["k"] = bits_to_json(self.k)
        return d


def verify_event_bound_kl(p, safe, prompt=(), e: EventSpec | None = None, max_len: int = 1,
                          cap: int | None = None, k_override: float | None = None,
                          frontier_override: Sequence[tuple] | None = None) -> KlEventCheck:
    """Check ``p(E) <= 2^((1+eps) k) safe(E) + delta`` along the exact frontier.

    ``k`` is ``KL(p || safe)``.  The overrides exist for negative controls:
    feeding an understated ``k`` or a false concentration claim must fail.
    """
    if e is None:
        raise InvalidInputError("an event is required")
    prompt = as_tokens(prompt)
    pd = materialize(p, prompt, max_len, cap)
    sd = materialize(safe, prompt, max_len, cap)
    k, frontier = concentration_frontier(pd, sd)
    pairs = [(f.epsilon, f.delta) for f in frontier]
    if k_override is not None:
        k = k_override
    if frontier_override is not None:
        pairs = list(frontier_override)
    pm, sm = event_mass(pd, e), event_mass(sd, e)
    worst_eps, worst = 0.0, math.inf
    for eps, delta in pairs:
        bound = math.inf if math.isinf(k) else 2.0 ** ((1 + eps) * k) * sm + delta
        slack = bound - pm
        if slack < worst:
            worst_eps, worst = eps, slack
    return KlEventCheck(e.name, k, pm, sm, worst_eps, worst, worst >= -TOL)


# --------------------------------------------------------------------------
# degradation


@dataclass
class DegradationCheck:
    kind: str
    measured: float
    bound: float
    passed: bool

    def to_json(self) -> dict:
        return {"kind": self.kind, "measured": bits_to_json(self.measured),
                "bound": bits_to_json(self.bound), "passed": self.passed}


def degradation_cp_delta(sources: Sequence[Categorical], divergence: Divergence,
                         combined: CombineResult | None = None) -> DegradationCheck:
    """MAX: ``TV(p, q_i) <= 1 - Z`` (``= TV(q1, q2)`` for two shards).
    KL: ``KL(p || q_i) <= -(m+1) log2 Z`` (``= -2 log2(1 - H^2)`` for two)."""
    divergence = Divergence(divergence)
    res = combine_next(sources, divergence) if combined is None else combined
    if divergence is Divergence.MAX:
        measured = max(tv(res.dist, q) for q in sources)
        bound = tv(sources[0], sources[1]) if len(sources) == 2 else 1.0 - res.z
        return DegradationCheck("cp-delta-max", measured, bound, measured <= bound + TOL)
    measured = max(kl(res.dist, q) for q in sources)
    bound = -len(sources) * math.log2(res.z)
    if len(sources) == 2:
        bound = -2 * math.log2(1 - hellinger_sq(sources[0], sources[1]))
    return DegradationCheck("cp-delta-kl", measured, bound, measured <= bound + TOL)


def degradation_cpk(p_k: Categorical, p: Categorical, nu: float) -> DegradationCheck:
    measured = tv(p_k, p)
    bound = 1.0 - nu
    return DegradationCheck("cp-k", measured, bound, measured <= bound + TOL)


def verify_degradation(protected, base_or_sources=None, prompt=(), max_len: int = 1,
                       cap: int | None = None) -> DegradationCheck:
    """Dispatch on the protected model's kind.

    A token-level combiner is checked at every reachable context (the lemma
    is per context); a CP-k sampler is checked on the full output law.
    """
    prompt = as_tokens(prompt)
    if isinstance(protected, CPkSampler):
        p_k, nu = cpk_distribution(protected, prompt, cap)
        base = materialize(protected.base if base_or_sources is None else base_or_sources, prompt, protected.max_len, cap)
        return degradation_cpk(p_k, base, nu)
    if isinstance(protected, CPDeltaModel):
        worst = None
        for prefix in incomplete_prefixes(protected, prompt, max_len, cap):
            dists = [s.next_token_dist(prompt, prefix) for s in protected.sources]
            check = degradation_cp_delta(dists, protected.divergence, protected.combine_at(prompt, prefix))
            if worst is None or check.measured - check.bound > worst.measured - worst.bound:
                worst = check
        return worst
    raise InvalidInputError(f"cannot check degradation for {type(protected).__name__}")


# --------------------------------------------------------------------------
# the suite


@dataclass
class CheckResult:
    name: str
    lemma: str
    passed: bool
    cases: int
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name} ({self.lemma}): {self.cases} cases"


@dataclass
class SuiteConfig:
    seeds: list = field(default_factory=lambda: list(range(100)))
    only: list | None = None
    corrupt: str | None = None
    tol: float = TOL
    cap: int | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "SuiteConfig":
        seeds = obj.get("seeds", 100)
        seeds = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
        only = obj.get("instances") or obj.get("only")
        tol = obj.get("tolerances", {}).get("bits", TOL)
        return cls(seeds=seeds, only=list(only) if only else None, corrupt=obj.get("corrupt"),
                   tol=float(tol), cap=obj.get("cap"))


@dataclass
class SuiteReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        lines = [c.line() for c in self.checks]
        verdict = "all checks passed" if self.passed else (
            "FAILED: " + ", ".join(f"{c.name} violates {c.lemma}" for c in self.failures))
        return "\n".join(lines + [verdict])

    def to_json(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def _check_example(cfg: SuiteConfig) -> CheckResult:
    ex = worked_example()
    corrupt = cfg.corrupt == "example-3.2"
    mx = combine_next([ex.q1, ex.q2], Divergence.MAX)
    kx = combine_next([ex.q1, ex.q2], Divergence.KL)
    z = mx.z * (0.9 if corrupt else 1.0)
    values = {
        "tv": tv(ex.q1, ex.q2),
        "hellinger_sq": hellinger_sq(ex.q1, ex.q2),
        "z_max": z,
        "z_kl": kx.z,
        "dmax_to_q1": dmax(mx.dist, ex.q1),
        "kl_to_q1": kl(kx.dist, ex.q1),
        "bound_max": -math.log2(z),
        "bound_kl": kx.k_bound,
        "output_is_q": float(mx.dist.allclose(ex.q) and kx.dist.allclose(ex.q)),
    }
    expected = {"tv": 0.5, "hellinger_sq": 0.5, "z_max": 0.5, "z_kl": 0.5, "dmax_to_q1": 1.0,
                "kl_to_q1": 1.0, "bound_max": 1.0, "bound_kl": 2.0, "output_is_q": 1.0}
    passed = all(abs(values[k] - expected[k]) <= 1e-12 for k in expected)
    return CheckResult("example-3.2", "worked example constants", passed, 1, values)


def _check_partition(cfg: SuiteConfig) -> CheckResult:
    worst = 0.0
    cases = 0
    for seed in cfg.seeds:
        rng = np.random.default_rng([seed, 1])
        for _ in range(10):
            p, q = random_pair(rng, int(rng.integers(2, 65)))
            zm = combine_next([p, q], Divergence.MAX).z
            zk = combine_next([p, q], Divergence.KL).z
            if cfg.corrupt == "partition":
                zm *= 0.9
            worst = max(worst, abs(zm - (1 - tv(p, q))), abs(zk - (1 - hellinger_sq(p, q))))
            cases += 1
    return CheckResult("partition", "partition-function lemma", worst < 1e-12, cases, {"worst_error": worst})


def _instances(cfg: SuiteConfig, salt: int) -> Iterable[Instance]:
    for seed in cfg.seeds:
        rng = np.random.default_rng([seed, salt])
        yield random_instance(rng, int(rng.integers(1, 4)))


def _check_naf_cp_delta(cfg: SuiteConfig) -> CheckResult:
    failures, cases = [], 0
    for inst in _instances(cfg, 2):
        for div in Divergence:
            sources = inst.cover
            if cfg.corrupt == "naf":
                protected = inst.cover[0]
                claimed = claimed_cp_delta_bound(cp_delta_model(sources, div), (), inst.max_len, cfg.cap)
            else:
                protected = cp_delta_model(sources, div)
                claimed = claimed_cp_delta_bound(protected, (), inst.max_len, cfg.cap)
            rec = verify_naf(protected, sources, (), claimed, inst.max_len, div, cfg.cap)
            cases += 1
            if not rec.passed:
                failures.append(rec.to_json())
    return CheckResult("naf-cp-delta", "CP-Delta NAF theorem", not failures, cases, {"failures": failures[:5]})


def _random_k(rng: np.random.Generator) -> float:
    return float(rng.choice([0.0, rng.uniform(0, 1), rng.uniform(0, 4)]))


def _check_naf_cp_k(cfg: SuiteConfig) -> CheckResult:
    failures, cases = [], 0
    for seed, inst in zip(cfg.seeds, _instances(cfg, 3)):
        rng = np.random.default_rng([seed, 33])
        for variant in Variant:
            s = CPkSampler(inst.base, inst.cover, _random_k(rng), variant, max_len=inst.max_len)
            nu = exact_nu(s, (), cfg.cap)
            if nu <= 0:
                continue
            claimed = k_tilde(s.k, nu)
            protected = s.base if cfg.corrupt == "naf" else s
            rec = verify_naf(protected, inst.cover, (), claimed, inst.max_len, Divergence.MAX, cfg.cap)
            cases += 1
            if not rec.passed:
                failures.append(rec.to_json())
    return CheckResult("naf-cp-k", "CP-k guarantee theorem", not failures, cases, {"failures": failures[:5]})


def _check_degradation(cfg: SuiteConfig) -> CheckResult:
    failures, cases = [], 0
    for seed, inst in zip(cfg.seeds, _instances(cfg, 4)):
        rng = np.random.default_rng([seed, 44])
        for div in Divergence:
            check = verify_degradation(cp_delta_model(inst.cover, div), None, (), inst.max_len, cfg.cap)
            cases += 1
            if not check.passed:
                failures.append(check.to_json())
        for variant in Variant:
            s = CPkSampler(inst.base, inst.cover, _random_k(rng), variant, max_len=inst.max_len)
            if exact_nu(s, (), cfg.cap) <= 0:
                continue
            if cfg.corrupt == "degradation":
                p_k, _ = cpk_distribution(s, (), cfg.cap)
                check = degradation_cpk(p_k, materialize(s.base, (), s.max_len, cfg.cap), 1.0)
                if check.measured == 0:
                    continue
            else:
                check = verify_degradation(s, None, (), inst.max_len, cfg.cap)
            cases += 1
            if not check.passed:
                failures.append(check.to_json())
    return CheckResult("degradation", "bounded-degradation lemma", not failures, cases, {"failures": failures[:5]})


def check_efficiency_instance(inst: Instance, cap: int | None = None, grid: int = 20,
                              understate_d: bool = False) -> dict:
    """Exact ``nu`` against the theorem's lower bounds, plus monotonicity in ``k``."""
    pd = materialize(inst.base, (), inst.max_len, cap)
    qs = [materialize(q, (), inst.max_len, cap) for q in inst.cover]
    d = dx_from_dists(pd, qs).d
    if d >= 1:
        return {"d": d, "skipped": True, "passed": True}
    d_used = 0.0 if understate_d else d
    out = {"d": d, "skipped": False}
    k_hard, lo_hard = efficiency_bound(d_used, Variant.HARD)
    nu_hard = exact_nu(CPkSampler(inst.base, inst.cover, k_hard, Variant.HARD, max_len=inst.max_len), (), cap)
    _, lo_smooth = efficiency_bound(d_used, Variant.SMOOTH)
    nu_smooth = exact_nu(CPkSampler(inst.base, inst.cover, 0.0, Variant.SMOOTH, max_len=inst.max_len), (), cap)
    ks = np.linspace(0.0, 2.0 * k_hard + 2.0, grid)
    mono = True
    for variant in Variant:
        nus = [exact_nu(CPkSampler(inst.base, inst.cover, k, variant, max_len=inst.max_len), (), cap) for k in ks]
        mono &= all(b >= a - TOL for a, b in zip(nus, nus[1:]))
    out.update(nu_hard=nu_hard, bound_hard=lo_hard, nu_smooth=nu_smooth, bound_smooth=lo_smooth, monotone=mono)
    out["passed"] = nu_hard >= lo_hard - TOL and nu_smooth >= lo_smooth - TOL and mono
    return out


def _check_efficiency(cfg: SuiteConfig) -> CheckResult:
    failures, cases = [], 0
    for inst in _instances(cfg, 5):
        res = check_efficiency_instance(inst, cfg.cap, understate_d=cfg.corrupt == "efficiency")
        if res["skipped"]:
            continue
        cases += 1
        if not res["passed"]:
            failures.append(res)
    return CheckResult("efficiency", "acceptance-probability bounds theorem", not failures, cases,
                       {"failures": failures[:5]})


def _check_corollary(cfg: SuiteConfig) -> CheckResult:
    worst, cases = 0.0, 0
    k = 1.0 if cfg.corrupt == "corollary" else 0.0
    for seed in cfg.seeds:
        rng = np.random.default_rng([seed, 6])
        p, q = random_pair(rng, int(rng.integers(2, 12)))
        alphabet = p.labels
        m1, m2 = TableModel.single(p, alphabet), TableModel.single(q, alphabet)
        p_k, _ = cpk_distribution(CPkSampler(m1, (m1, m2), k, Variant.SMOOTH, max_len=1), ())
        ref = combine_next([p, q], Divergence.MAX).dist
        _, a, b = align(ref, Categorical([y[0] for y in p_k.labels], p_k.probs))
        worst = max(worst, float(np.max(np.abs(a - b))))
        cases += 1
    return CheckResult("corollary", "smooth-CP-k at k=0 recovers CP-Delta", worst <= 1e-12, cases,
                       {"worst_error": worst})


def random_events(rng: np.random.Generator, labels: Sequence, count: int) -> list[EventSpec]:
    out = []
    for i in range(count):
        mask = rng.random(len(labels)) < rng.uniform(0.1, 0.9)
        out.append(EventSpec.of([y for y, keep in zip(labels, mask) if keep], name=f"random-{i}"))
    return out


def _check_event_max(cfg: SuiteConfig) -> CheckResult:
    failures, cases = [], 0
    for seed, inst in zip(cfg.seeds, _instances(cfg, 7)):
        rng = np.random.default_rng([seed, 77])
        model = cp_delta_model(inst.cover, Divergence.MAX)
        k = claimed_cp_delta_bound(model, (), inst.max_len, cfg.cap)
        p = inst.cover[0] if cfg.corrupt == "event-max" else model
        labels = materialize(inst.base, (), inst.max_len, cfg.cap).labels
        events = random_events(rng, labels, 5)
        if cfg.corrupt == "event-max":
            q0 = materialize(inst.cover[0], (), inst.max_len, cfg.cap)
            worst = max(labels, key=lambda y: q0.prob(y) / max(min(materialize(q, (), inst.max_len, cfg.cap).prob(y) for q in inst.cover), 1e-300))
            events = [EventSpec.of([worst], name="most-memorized")]
        for e in events:
            check = verify_event_bound(p, inst.cover, (), e, k, inst.max_len, cfg.cap)
            cases += 1
            if not check.passed:
                failures.append(check.to_json())
    return CheckResult("event-max", "max-divergence event bound", not failures, cases, {"failures": failures[:5]})


def _check_event_kl(cfg: SuiteConfig) -> CheckResult:
    failures, cases = [], 0
    for seed, inst in zip(cfg.seeds, _instances(cfg, 8)):
        rng = np.random.default_rng([seed, 88])
        model = cp_delta_model(inst.cover, Divergence.KL)
        pd = materialize(model, (), inst.max_len, cfg.cap)
        for q in inst.cover:
            events = random_events(rng, pd.labels, 3)
            for e in events:
                if cfg.corrupt == "event-kl":
                    check = verify_event_bound_kl(pd, q, (), e, inst.max_len, cfg.cap, frontier_override=[(0.0, 0.0)], k_override=0.0)
                else:
                    check = verify_event_bound_kl(pd, q, (), e, inst.max_len, cfg.cap)
                cases += 1
                if not check.passed:
                    failures.append(check.to_json())
    return CheckResult("event-kl", "concentrated-KL event bound", not failures, cases, {"failures": failures[:5]})


CHECKS = {
    "example-3.2": _check_example,
    "partition": _check_partition,
    "naf-cp-delta": _check_naf_cp_delta,
    "naf-cp-k": _check_naf_cp_k,
    "degradation": _check_degradation,
    "efficiency": _check_efficiency,
    "corollary": _check_corollary,
    "event-max": _check_event_max,
    "event-kl": _check_event_kl,
}

CORRUPTIBLE = {
    "example-3.2": ["example-3.2"],
    "partition": ["partition"],
    "naf": ["naf-cp-delta", "naf-cp-k"],
    "degradation": ["degradation"],
    "efficiency": ["efficiency"],
    "corollary": ["corollary"],
    "event-max": ["event-max"],
    "event-kl": ["event-kl"],
}


def verify_suite(config: SuiteConfig | dict | None = None) -> SuiteReport:
    """Run the selected checks; failures are results, never exceptions."""
    cfg = config if isinstance(config, SuiteConfig) else SuiteConfig.from_json(config or {})
    if cfg.corrupt is not None and cfg.corrupt not in CORRUPTIBLE:
        raise InvalidInputError(f"unknown corruption {cfg.corrupt!r}; choose from {sorted(CORRUPTIBLE)}")
    names = cfg.only or list(CHECKS)
    if cfg.corrupt is not None and cfg.only is None:
        names = CORRUPTIBLE[cfg.corrupt]
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise InvalidInputError(f"unknown checks {unknown}; choose from {sorted(CHECKS)}")
    results = []
    for name in names:
        start = time.perf_counter()
        res = CHECKS[name](cfg)
        res.seconds = round(time.perf_counter() - start, 3)
        results.append(res)
    return SuiteReport(results)


def report_json(report: SuiteReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, (tuple, frozenset, set)):
        return list(x)
    raise TypeError(f"not serializable: {type(x).__name__}")
