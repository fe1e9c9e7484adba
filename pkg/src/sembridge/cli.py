"""Command-line surface tying the modules into reproducible pipelines.

Six subcommands: ``transplant`` builds a target embedding matrix, ``eval``
scores a run against qrels, ``bench`` runs the strategy comparison on a
generated world, ``inspect`` explains one target token's provenance,
``vocab-stats`` summarizes script classes, and ``gen-world`` emits a
synthetic benchmark directory.

Exit codes are a stable contract: 0 success, 2 usage/validation/config
error, 3 runtime/numeric failure. Every failure prints a single
machine-parsable line to stderr. Commands that write files also write a run
manifest next to the primary output; manifests carry wall time and are the
only outputs exempt from byte-for-byte rerun identity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, densevec
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    InapplicableError,
    SolverError,
    ValidationError,
)
from .retrieval import (
    build_index,
    flops_metric,
    ndcg_at_k,
    read_qrels,
    read_vectors_jsonl,
    search,
    write_run,
)
from .synthbench import (
    BENCH_NDCG_K,
    SyntheticLanguageSpec,
    generate_world,
    read_world,
    render_bench_table,
    run_zero_shot_bench,
    write_world,
)
from .transplant import (
    STRATEGIES,
    TransplantConfig,
    TransplantReport,
    transplant,
)
from .vocab import (
    EMPTY_POLICY,
    NormalizationPolicy,
    SCRIPT_CLASSES,
    Vocabulary,
    compute_overlap,
    script_distribution,
)

_BRIDGE_STRATEGIES = ("sembridge", "focus_like", "ofa_like")

_USAGE_ERRORS = (
    AlignmentError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    InapplicableError,
    ValidationError,
    OSError,
)


@dataclass
class RunManifest:
    """Reproducibility sidecar written next to every file-producing command."""

    command: str
    args: dict
    inputs: dict[str, str]
    version: str = __version__
    wall_time_s: float = 0.0

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(asdict(self), fh, sort_keys=True, indent=2)
            fh.write("\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digests(paths: dict[str, object]) -> dict[str, str]:
    return {name: _sha256(p) for name, p in sorted(paths.items()) if p is not None}


def _echo_args(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}


def _default_threads() -> int:
    env = os.environ.get("SEMBRIDGE_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"SEMBRIDGE_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError(f"SEMBRIDGE_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def _resolve_threads(value: int | None) -> int:
    if value is None:
        return _default_threads()
    if value < 1:
        raise ConfigError(f"--threads must be >= 1, got {value}")
    return value


def _policy_from_args(args: argparse.Namespace) -> NormalizationPolicy:
    markers = tuple(m for m in (args.strip_markers or "").split(",") if m)
    if not (args.casefold or args.trim or args.nfkc or markers):
        return EMPTY_POLICY
    return NormalizationPolicy(
        case_fold=args.casefold,
        trim_whitespace=args.trim,
        strip_subword_markers=markers,
        apply_unicode_nfkc=args.nfkc,
    )


def _add_policy_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--casefold", action="store_true", help="casefold before matching")
    sub.add_argument("--trim", action="store_true", help="trim whitespace before matching")
    sub.add_argument("--nfkc", action="store_true", help="apply unicode NFKC first")
    sub.add_argument(
        "--strip-markers",
        default="",
        metavar="M1,M2",
        help="comma-separated subword markers to strip once from token edges",
    )


def _manifest_path(out_path, override) -> Path:
    if override is not None:
        return Path(override)
    return Path(str(out_path) + ".manifest.json")


# ---------------------------------------------------------------------------
# transplant


def cmd_transplant(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    threads = _resolve_threads(args.threads)
    if args.strategy in _BRIDGE_STRATEGIES and not (args.bridge_src and args.bridge_tgt):
        raise ConfigError(
            f"strategy {args.strategy} requires --bridge-src and --bridge-tgt"
        )
    source_vocab = Vocabulary.read_jsonl(args.source_vocab)
    target_vocab = Vocabulary.read_jsonl(args.target_vocab)
    source_emb = densevec.read_matrix(args.source_emb)
    if source_emb.shape[0] != len(source_vocab):
        raise AlignmentError(
            f"source embedding has {source_emb.shape[0]} rows"
            f" but source vocabulary has {len(source_vocab)} tokens"
        )
    policy = _policy_from_args(args)
    overlap = compute_overlap(source_vocab, target_vocab, policy)

    bridge_src = bridge_tgt = None
    if args.bridge_src and args.bridge_tgt:
        from .bridge import load_bridge

        bridge_src, _ = load_bridge(args.source_vocab, args.bridge_src)
        bridge_tgt, _ = load_bridge(args.target_vocab, args.bridge_tgt)

    excluded = tuple(int(t) for t in args.exclude_source_ids.split(",") if t) if args.exclude_source_ids else ()
    cfg = TransplantConfig(
        strategy=args.strategy,
        alpha=args.alpha,
        seed=args.seed,
        fallback=args.fallback,
        exclude_source_ids=excluded,
    )
    matrix, report = transplant(
        source_emb,
        source_vocab,
        target_vocab,
        overlap,
        bridge_src=bridge_src,
        bridge_tgt=bridge_tgt,
        cfg=cfg,
        threads=threads,
    )
    densevec.write_matrix(matrix, args.out)
    report.write_json(args.report)

    inputs = {
        "source_emb": args.source_emb,
        "source_vocab": args.source_vocab,
        "target_vocab": args.target_vocab,
        "bridge_src": args.bridge_src,
        "bridge_tgt": args.bridge_tgt,
    }
    manifest = RunManifest(
        command="transplant",
        args=_echo_args(args),
        inputs=_digests(inputs),
        wall_time_s=time.perf_counter() - started,
    )
    manifest.write(_manifest_path(args.out, args.manifest))
    c = report.counts
    print(
        f"wrote {args.out}: {matrix.shape[0]} x {matrix.shape[1]}"
        f" (copied {c['overlap_copied']}, synthesized {c['synthesized']},"
        f" fallback {c['fallback']})"
    )
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if args.k < 1:
        raise ConfigError(f"--k must be >= 1, got {args.k}")
    corpus = read_vectors_jsonl(args.corpus_vectors)
    queries = read_vectors_jsonl(args.query_vectors)
    qrels = read_qrels(args.qrels)
    index = build_index(corpus)
    run = {q.id: search(index, q, k=args.k) for q in queries}
    result = ndcg_at_k(run, qrels, k=args.k)
    flops = flops_metric(queries, corpus)
    write_run(run, args.run_out, tag=args.tag)
    manifest = RunManifest(
        command="eval",
        args=_echo_args(args),
        inputs=_digests(
            {
                "corpus_vectors": args.corpus_vectors,
                "query_vectors": args.query_vectors,
                "qrels": args.qrels,
            }
        ),
        wall_time_s=time.perf_counter() - started,
    )
    manifest.write(_manifest_path(args.run_out, args.manifest))
    if args.json:
        print(
            json.dumps(
                {
                    "k": args.k,
                    "mean_ndcg": result.mean_ndcg,
                    "flops": flops,
                    "query_count": result.query_count,
                    "ndcg_per_query": dict(sorted(result.ndcg_per_query.items())),
                },
                sort_keys=True,
                indent=2,
            )
        )
    else:
        print(f"queries: {result.query_count}")
        print(f"mean nDCG@{args.k}: {result.mean_ndcg:.4f}")
        print(f"FLOPS: {flops:.4f}")
    return 0


# ---------------------------------------------------------------------------
# bench


def _parse_strategy_token(token: str) -> TransplantConfig:
    name, _, alpha_text = token.partition(":")
    name = name.strip()
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    alpha = 4.0
    if alpha_text:
        try:
            alpha = float(alpha_text)
        except ValueError as exc:
            raise ConfigError(f"bad alpha in strategy token {token!r}") from exc
    return TransplantConfig(strategy=name, alpha=alpha)


_DEFAULT_BENCH = "sembridge:4,sembridge:1,focus_like,ofa_like,multivariate,univariate,mean,random"


def cmd_bench(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    threads = _resolve_threads(args.threads)
    world = read_world(args.world)
    seed = world.spec.seed if args.seed is None else args.seed
    strategies = []
    for token in args.strategies.split(","):
        token = token.strip()
        if not token:
            continue
        cfg = _parse_strategy_token(token)
        strategies.append(
            TransplantConfig(strategy=cfg.strategy, alpha=cfg.alpha, seed=seed)
        )
    if not strategies:
        raise ConfigError("--strategies selected nothing")
    rows = run_zero_shot_bench(world, strategies, k=args.k, threads=threads)
    payload = {
        "k": args.k,
        "world": str(args.world),
        "seed": seed,
        "rows": [row.to_dict() for row in rows],
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        world_dir = Path(args.world)
        manifest = RunManifest(
            command="bench",
            args=_echo_args(args),
            inputs=_digests({p.name: p for p in sorted(world_dir.iterdir()) if p.is_file()}),
            wall_time_s=time.perf_counter() - started,
        )
        manifest.write(_manifest_path(args.out, args.manifest))
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        sys.stdout.write(render_bench_table(rows, k=args.k))
    return 0


# ---------------------------------------------------------------------------
# inspect


def _resolve_token(vocab: Vocabulary, text: str) -> int:
    tid = vocab.id_of.get(text)
    if tid is not None:
        return tid
    try:
        tid = int(text)
    except ValueError:
        raise ValidationError(f"token {text!r} not in target vocabulary") from None
    if not 0 <= tid < len(vocab):
        raise ValidationError(f"token id {tid} out of range for vocabulary of {len(vocab)}")
    return tid


def cmd_inspect(args: argparse.Namespace) -> int:
    if args.top_k < 1:
        raise ConfigError(f"--top-k must be >= 1, got {args.top_k}")
    report = TransplantReport.read_json(args.report)
    source_vocab = Vocabulary.read_jsonl(args.source_vocab)
    target_vocab = Vocabulary.read_jsonl(args.target_vocab)
    if len(report.provenance) != len(target_vocab):
        raise AlignmentError(
            f"report covers {len(report.provenance)} tokens"
            f" but target vocabulary has {len(target_vocab)}"
        )
    tid = _resolve_token(target_vocab, args.token)
    record = report.provenance[tid]
    token = target_vocab.tokens[tid]

    out: dict = {"target_id": tid, "token": token, "kind": record["kind"]}
    lines = [f"token {token!r} (id {tid}): {record['kind']}"]
    if record["kind"] == "copied":
        sid = record["source_id"]
        out["source_id"] = sid
        out["source_token"] = source_vocab.tokens[sid]
        lines = [f"token {token!r} (id {tid}): copied from {out['source_token']!r} (id {sid})"]
    elif record["kind"] == "weights":
        pairs = record["weights"][: args.top_k]
        out["strategy"] = record["strategy"]
        out["weights"] = [
            {"source_id": sid, "source_token": source_vocab.tokens[sid], "weight": w}
            for sid, w in pairs
        ]
        lines = [f"token {token!r} (id {tid}): synthesized by {record['strategy']}"]
        for rank, (sid, w) in enumerate(pairs, start=1):
            lines.append(f"  {rank}. {source_vocab.tokens[sid]!r} (id {sid})  weight {w:.6f}")
    elif record["kind"] == "fallback":
        out["strategy"] = record["strategy"]
        lines = [f"token {token!r} (id {tid}): fallback to {record['strategy']} (no usable bridge vector)"]
    else:
        out["strategy"] = record.get("strategy")
        lines = [f"token {token!r} (id {tid}): synthesized by {record.get('strategy')} (no weight records)"]

    if args.json:
        print(json.dumps(out, sort_keys=True, indent=2))
    else:
        print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# vocab-stats


def cmd_vocab_stats(args: argparse.Namespace) -> int:
    vocab = Vocabulary.read_jsonl(args.vocab)
    counts = script_distribution(vocab)
    total = len(vocab)
    if args.json:
        payload = {
            "total": total,
            "counts": counts,
            "percentages": {k: 100.0 * v / total for k, v in counts.items()},
        }
        print(json.dumps(payload, sort_keys=True, indent=2))
        return 0
    print(f"tokens: {total}")
    width = max(len(name) for name in SCRIPT_CLASSES)
    for name in sorted(SCRIPT_CLASSES, key=lambda s: (-counts[s], s)):
        pct = 100.0 * counts[name] / total
        print(f"  {name:<{width}}  {counts[name]:>8}  {pct:6.2f}%")
    return 0


# ---------------------------------------------------------------------------
# gen-world


def cmd_gen_world(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    spec = SyntheticLanguageSpec(
        n_source=args.n_source,
        n_target=args.n_target,
        overlap_fraction=args.overlap_fraction,
        bridge_dim=args.bridge_dim,
        model_dim=args.model_dim,
        noise_sigma=args.noise_sigma,
        docs=args.docs,
        queries=args.queries,
        doc_len=args.doc_len,
        seed=args.seed,
    )
    world = generate_world(spec)
    paths = write_world(world, args.out)
    manifest = RunManifest(
        command="gen-world",
        args=_echo_args(args),
        inputs={},
        wall_time_s=time.perf_counter() - started,
    )
    manifest.write(Path(args.out) / "manifest.json")
    print(f"wrote world to {args.out} ({len(paths)} files)")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sembridge",
        description="Sparse-encoder vocabulary transplantation toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"sembridge {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    t = subs.add_parser("transplant", help="build a target embedding matrix")
    t.add_argument("--source-emb", required=True)
    t.add_argument("--source-vocab", required=True)
    t.add_argument("--target-vocab", required=True)
    t.add_argument("--bridge-src")
    t.add_argument("--bridge-tgt")
    t.add_argument("--strategy", default="sembridge", choices=STRATEGIES)
    t.add_argument("--alpha", type=float, default=4.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--fallback", default="mean", choices=("mean", "random"))
    t.add_argument("--exclude-source-ids", default="", metavar="ID1,ID2")
    t.add_argument("--out", required=True, help="output EMBM matrix path")
    t.add_argument("--report", required=True, help="output report JSON path")
    t.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    t.add_argument("--threads", type=int, default=None)
    _add_policy_flags(t)
    t.set_defaults(func=cmd_transplant)

    e = subs.add_parser("eval", help="score a query set against qrels")
    e.add_argument("--corpus-vectors", required=True)
    e.add_argument("--query-vectors", required=True)
    e.add_argument("--qrels", required=True)
    e.add_argument("--k", type=int, default=10)
    e.add_argument("--run-out", required=True, help="output run file path")
    e.add_argument("--tag", default="sembridge")
    e.add_argument("--manifest", help="manifest path (default: <run-out>.manifest.json)")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_eval)

    b = subs.add_parser("bench", help="strategy comparison on a generated world")
    b.add_argument("--world", required=True, help="directory written by gen-world")
    b.add_argument("--strategies", default=_DEFAULT_BENCH, metavar="S1,S2")
    b.add_argument("--k", type=int, default=BENCH_NDCG_K)
    b.add_argument("--seed", type=int, default=None, help="transplant seed (default: world seed)")
    b.add_argument("--out", help="output results JSON path")
    b.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    b.add_argument("--json", action="store_true")
    b.add_argument("--threads", type=int, default=None)
    b.set_defaults(func=cmd_bench)

    i = subs.add_parser("inspect", help="explain one target token's provenance")
    i.add_argument("--report", required=True)
    i.add_argument("--source-vocab", required=True)
    i.add_argument("--target-vocab", required=True)
    i.add_argument("--token", required=True, help="surface string, or id if not a token")
    i.add_argument("--top-k", type=int, default=10)
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_inspect)

    v = subs.add_parser("vocab-stats", help="script-class counts for a vocabulary")
    v.add_argument("--vocab", required=True)
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_vocab_stats)

    g = subs.add_parser("gen-world", help="emit a synthetic benchmark directory")
    g.add_argument("--n-source", type=int, default=2000)
    g.add_argument("--n-target", type=int, default=500)
    g.add_argument("--overlap-fraction", type=float, default=0.1)
    g.add_argument("--bridge-dim", type=int, default=32)
    g.add_argument("--model-dim", type=int, default=48)
    g.add_argument("--noise-sigma", type=float, default=0.05)
    g.add_argument("--docs", type=int, default=500)
    g.add_argument("--queries", type=int, default=100)
    g.add_argument("--doc-len", type=int, default=20)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen_world)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        reason = " ".join(str(exc).split())
        print(f"sembridge: error: {type(exc).__name__}: {reason}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver and unexpected numeric failures
        if os.environ.get("SEMBRIDGE_DEBUG"):
            raise
        reason = " ".join(str(exc).split())
        print(f"sembridge: error: {type(exc).__name__}: {reason}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
