"""``naf`` command line: train, protect, sample, verify, report.

Every output is computed in memory and validated before the first file is
written, so a failing command leaves nothing behind.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cp_delta import CPDeltaModel, Divergence, context_z_values, z_summary
from .cp_k import CPkSampler, Variant, estimate_nu, log_ratio_percentile
from .demo import bundled_demo_path, load_demo
from .dist import bits_to_json
from .errors import ExhaustedError, NafError, UndefinedBoundError
from .models import EOS, as_tokens, enum_cap_from_env, load_model, sample_sequence, score_sequence
from .oracle import SuiteConfig, report_json, verify_suite
from .sharding import NGramTrainer, build_safe_cover, leave_one_out, load_dataset, plan_shards

PURPOSES = {"plan": 0, "sample": 1, "nu": 2, "contexts": 3, "calibrate": 4, "report": 5}
LOO_WARN_TAGS = 32
METHODS = ("cp-delta", "cp-k", "smooth-cp-k")


def derived_rng(seed: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng([seed, PURPOSES[purpose]])


def derived_seed(seed: int, purpose: str) -> int:
    return int(np.random.SeedSequence([seed, PURPOSES[purpose]]).generate_state(1)[0])


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    seed: int = 0
    m: int | None = None
    n: int | None = None
    alpha: float | None = None
    method: str | None = None
    divergence: str | None = None
    k: float | None = None
    max_len: int | None = None
    trials: int | None = None
    cap: int | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        fields = {f: getattr(args, f, None) for f in cls.__dataclass_fields__}
        fields["cap"] = enum_cap_from_env()
        return cls(**fields)


class Outputs:
    """Collects files and writes them only once the command has succeeded."""

    def __init__(self):
        self.files: dict[Path, str | bytes] = {}

    def json(self, path, obj) -> None:
        self.files[Path(path)] = json.dumps(obj, indent=2, sort_keys=True) + "\n"

    def text(self, path, text: str) -> None:
        self.files[Path(path)] = text

    def commit(self) -> None:
        for path, payload in self.files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            mode = "wb" if isinstance(payload, bytes) else "w"
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, mode) as fh:
                fh.write(payload)
            os.replace(tmp, path)


def _text(y: Sequence) -> str:
    return " ".join(t for t in y if t != EOS)


# --------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    cfg = RunConfig.from_args(args)
    data = load_dataset(args.data) if args.data else load_demo()
    if len(data) == 0:
        raise NafError("the dataset is empty")
    plan = plan_shards(data, args.m, seed=derived_seed(args.seed, "plan"))
    trainer = NGramTrainer(args.n, args.alpha)
    vocab = data.vocab()
    cover = build_safe_cover(data, plan, trainer, vocab)
    full = trainer(data.docs, vocab)

    out = Path(args.out)
    files = Outputs()
    files.json(out / "plan.json", plan.to_json())
    shard_files = [f"shard_{i}.json" for i in range(plan.num_shards)]
    for name, model in zip(shard_files, cover.models):
        files.json(out / name, model.to_json())
    files.json(out / "full.json", full.to_json())
    tagged = {t: sorted({z.key for z in data if t in z.tags}) for t in data.tag_universe()}
    files.json(out / "cover.json", {
        "models": shard_files,
        "full": "full.json",
        "safe_index": cover.safe_index,
        "tagged_docs": tagged,
        "config": asdict(cfg),
    })
    tags = data.tag_universe()
    if args.leave_one_out:
        if len(tags) > LOO_WARN_TAGS:
            print(f"warning: retraining once per tag ({len(tags)} tags)", file=sys.stderr)
        for i, tag in enumerate(tags):
            files.json(out / f"loo_{i}.json", {"tag": tag, "model": leave_one_out(data, tag, trainer, vocab).to_json()})
    files.commit()
    sizes = [len(plan.shard_indices(i)) for i in range(plan.num_shards)]
    print(f"trained {plan.num_shards} shard models (sizes {sizes}) and a full-data model; vocab {len(vocab)}")
    for tag in tags:
        print(f"  {tag}: safe model shard_{cover.safe_index[tag]}")
    return 0


# --------------------------------------------------------------------------
# protect


def _load_cover(models_dir: Path) -> tuple[dict, list]:
    with open(models_dir / "cover.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    return meta, [load_model(models_dir / name) for name in meta["models"]]


def cmd_protect(args) -> int:
    models_dir = Path(args.models)
    meta, shards = _load_cover(models_dir)
    out_path = Path(args.out)
    prompt = as_tokens(args.prompt)
    descriptor = {
        "method": args.method,
        "models_dir": os.path.relpath(models_dir.resolve(), out_path.resolve().parent),
        "cover": meta["models"],
        "max_len": args.max_len,
        "prompt": list(prompt),
    }
    if args.method == "cp-delta":
        model = CPDeltaModel(shards, args.divergence)
        zs = context_z_values(model, prompt, derived_rng(args.seed, "contexts"), args.contexts, args.max_len)
        summary = z_summary(zs)
        descriptor.update(divergence=args.divergence, z_stats=summary)
        scale = "" if args.divergence == "max" else f" x (m+1) = {len(shards)}"
        print(f"cp-delta ({args.divergence}): {summary['contexts']} contexts visited, "
              f"Z in [{summary['z_min']:.4f}, {summary['z_max']:.4f}], "
              f"per-token bound -log2 Z up to {summary['neg_log_z_max']:.4f} bits{scale}")
    else:
        base_name = args.base or meta["full"]
        base = load_model(models_dir / base_name)
        variant = Variant.HARD if args.method == "cp-k" else Variant.SMOOTH
        if args.k is None and args.k_percentile is None:
            raise NafError("cp-k needs --k or --k-percentile")
        if args.k is not None:
            k, source = float(args.k), "given"
        else:
            k, _ = log_ratio_percentile(base, shards, prompt, args.calibration_samples, args.k_percentile,
                                        derived_rng(args.seed, "calibrate"), args.max_len)
            source = f"percentile {args.k_percentile} of {args.calibration_samples} log-ratios"
        CPkSampler(base, shards, k, variant, max_len=args.max_len)
        descriptor.update(base=base_name, k=bits_to_json(k), k_source=source, variant=variant.value,
                          max_attempts=args.max_attempts)
        print(f"{args.method}: threshold k = {k:.4f} bits ({source}); "
              f"reported bound is k + log2(1/nu) once nu is measured")
        if variant is Variant.SMOOTH and k == 0 and len(shards) == 2 and base_name in meta["models"]:
            print("note: smooth-cp-k with k=0 and a cover member as base samples exactly the "
                  "cp-delta (max) combination, recovering its guarantee")
    descriptor["config"] = asdict(RunConfig.from_args(args))
    files = Outputs()
    files.json(out_path, descriptor)
    files.commit()
    return 0


# --------------------------------------------------------------------------
# sample


def _load_protected(path: Path):
    with open(path, encoding="utf-8") as fh:
        desc = json.load(fh)
    models_dir = (path.resolve().parent / desc["models_dir"]).resolve()
    shards = [load_model(models_dir / name) for name in desc["cover"]]
    if desc["method"] == "cp-delta":
        return desc, shards, CPDeltaModel(shards, desc["divergence"])
    base = load_model(models_dir / desc["base"])
    k = math.inf if desc["k"] == "inf" else float(desc["k"])
    s = CPkSampler(base, shards, k, desc["variant"], max_attempts=desc["max_attempts"], max_len=desc["max_len"])
    return desc, shards, s


def cmd_sample(args) -> int:
    path = Path(args.protected)
    desc, shards, protected = _load_protected(path)
    prompt = tuple(desc["prompt"]) if args.prompt is None else as_tokens(args.prompt)
    rng = derived_rng(args.seed, "sample")
    lines = []
    for _ in range(args.num):
        if isinstance(protected, CPkSampler):
            res = protected.sample(prompt, rng)
            y, attempts, log_p = res.tokens, res.attempts, res.log_p
            log_q = res.log_q
        else:
            y = sample_sequence(protected, prompt, rng, desc["max_len"])
            attempts = 1
            log_p = score_sequence(protected, prompt, y)
            log_q = tuple(score_sequence(q, prompt, y) for q in shards)
        lines.append({
            "text": _text(y),
            "log_p": bits_to_json(log_p),
            "min_log_q": bits_to_json(min(log_q)),
            "ratio_bits": bits_to_json(log_p - min(log_q)),
            "attempts": attempts,
        })
    report = _aggregate(desc, protected, prompt, args)
    files = Outputs()
    if args.out:
        files.text(args.out, "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines))
    if args.report:
        files.json(args.report, report)
    files.commit()
    if not args.out:
        for line in lines:
            print(json.dumps(line, sort_keys=True))
    print(json.dumps(report, sort_keys=True), file=sys.stderr if not args.out else sys.stdout)
    return 0


def _aggregate(desc: dict, protected, prompt, args) -> dict:
    if isinstance(protected, CPkSampler):
        stats = estimate_nu(protected, prompt, args.trials, derived_rng(args.seed, "nu"), cap=enum_cap_from_env())
        out = stats.report(protected.k)
        out["method"] = desc["method"]
        out["nu_hat"] = out["nu"]
        if stats.nu_hat <= 0:
            out["k_tilde"] = "inf"
        return out
    # combiner outputs need no rejection: nu is 1 and the bound is a priori
    bound = desc["z_stats"]["neg_log_z_max"]
    if desc["divergence"] == "kl":
        bound *= len(desc["cover"])
    return {"method": "cp-delta", "k": bound, "nu": 1.0, "nu_hat": 1.0, "nu_ci": [1.0, 1.0],
            "k_tilde": "per-token", "exact": True}


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    obj = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            obj = json.load(fh)
    cfg = SuiteConfig.from_json(obj)
    if args.seeds is not None:
        cfg.seeds = list(range(args.seeds))
    if args.only:
        cfg.only = args.only
    if args.corrupt:
        cfg.corrupt = args.corrupt
    cfg.cap = cfg.cap or enum_cap_from_env()
    report = verify_suite(cfg)
    if args.out:
        files = Outputs()
        files.text(args.out, report_json(report) + "\n")
        files.commit()
    print(report.summary())
    return 0 if report.passed else 1


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    from . import report as rp
    from .fixtures import spiked_pair

    models_dir = Path(args.models)
    meta, shards = _load_cover(models_dir)
    full = load_model(models_dir / meta["full"])
    out = Path(args.out)
    prompt = as_tokens(args.prompt)
    rng = derived_rng(args.seed, "report")
    k, ratios = log_ratio_percentile(full, shards, prompt, args.samples, args.k_percentile, rng, args.max_len)
    combined = CPDeltaModel(shards, Divergence.MAX)
    zs = context_z_values(combined, prompt, rng, args.samples // 10 or 1, args.max_len)
    q1, q2 = spiked_pair()
    labels, rows = rp.spiked_table(q1, q2)

    sampler = CPkSampler(full, shards, k, Variant.HARD, max_len=args.max_len)
    leak_rows = []
    for tag, docs in sorted(meta.get("tagged_docs", {}).items()):
        for doc in docs:
            y = as_tokens(doc) + (EOS,)
            leak_rows.append([tag, doc, 2.0 ** score_sequence(full, prompt, y),
                              sampler.log_ratio(prompt, y), sampler.accept_prob(prompt, y)])

    out.mkdir(parents=True, exist_ok=True)
    written = [
        rp.write_csv(out / "log_ratios.csv", ["sample", "log_ratio_bits"], enumerate(ratios.tolist())),
        rp.log_ratio_histogram(ratios, k, out / "log_ratios.png",
                               {f"{r[0]} ({r[3]:.1f} bits)": r[3] for r in leak_rows if math.isfinite(r[3])}),
        rp.write_csv(out / "context_z.csv", ["context", "z"], enumerate(zs.tolist())),
        rp.z_histogram(zs, out / "context_z.png"),
        rp.write_csv(out / "spiked.csv", ["label", "q1", "q2", "combined_max", "combined_kl"],
                     ([str(lab), *row] for lab, row in zip(labels, rows.T.tolist()))),
        rp.spiked_figure(q1, q2, out / "spiked.png"),
        rp.write_csv(out / "tagged.csv", ["tag", "doc", "p_full", "log_ratio_bits", "accept_prob"], leak_rows),
    ]
    print(f"k at percentile {args.k_percentile}: {k:.4f} bits")
    for path in written:
        print(f"  wrote {path}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="naf", description="Copyright-protected sampling from sharded models.")
    parser.add_argument("--seed", type=int, default=0, help="global seed; per-purpose seeds are derived from it")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("train", help="plan shards and train shard and full-data models")
    p.add_argument("--data", help=f"JSON-lines dataset (default: bundled {bundled_demo_path().name})")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--m", type=int, default=1, help="maximum tag multiplicity; m+1 shards")
    p.add_argument("--n", type=int, default=2, help="n-gram order")
    p.add_argument("--alpha", type=float, default=0.1, help="add-alpha smoothing")
    p.add_argument("--leave-one-out", action="store_true", help="also retrain once per tag without it")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("protect", help="write a protected-model descriptor")
    p.add_argument("--models", required=True, help="directory written by train")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--divergence", choices=[d.value for d in Divergence], default="max")
    p.add_argument("--k", type=float, help="threshold in bits")
    p.add_argument("--k-percentile", type=float, help="calibrate k as this percentile of observed log-ratios")
    p.add_argument("--calibration-samples", type=int, default=10_000)
    p.add_argument("--base", help="base model file in the models directory (default: full-data model)")
    p.add_argument("--max-len", type=int, default=32)
    p.add_argument("--max-attempts", type=int, default=10_000)
    p.add_argument("--contexts", type=int, default=500, help="samples used to visit contexts for Z statistics")
    p.add_argument("--prompt", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_protect)

    p = sub.add_parser("sample", help="sample with per-sequence certificates")
    p.add_argument("--protected", required=True, help="descriptor written by protect")
    p.add_argument("--num", type=int, default=10)
    p.add_argument("--trials", type=int, default=2000, help="Monte-Carlo trials for nu when enumeration is infeasible")
    p.add_argument("--prompt", default=None)
    p.add_argument("--out", help="certificate JSON lines (default: stdout)")
    p.add_argument("--report", help="aggregate JSON with nu and k_tilde")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="run the brute-force oracle suite")
    p.add_argument("--config", help="JSON {instances, seeds, tolerances}")
    p.add_argument("--only", nargs="+", help="run only these checks")
    p.add_argument("--corrupt", help="run against a deliberately broken fixture (must fail)")
    p.add_argument("--seeds", type=int, help="number of random instances per check")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="render figures and CSV tables")
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--k-percentile", type=float, default=95.0)
    p.add_argument("--max-len", type=int, default=32)
    p.add_argument("--prompt", default="")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NafError, UndefinedBoundError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
