"""End-to-end acceptance gate.

One test per shipping criterion; each prints a single ``[PASS]``/``[FAIL]``
line so ``pytest tests/test_acceptance.py -s`` doubles as the release
checklist. Criteria that carry a runtime budget time themselves and fail
when over budget.
"""

import functools
import hashlib
import time

import numpy as np
import pytest
from oracles import brute_force_search, grid_entmax

from sembridge.cli import main
from sembridge.entmax import EntmaxConfig, entmax_batch, sparsemax_batch
from sembridge.retrieval import (
    SparseVector,
    build_index,
    flops_metric,
    ndcg_at_k,
    search,
)
from sembridge.synthbench import (
    SyntheticLanguageSpec,
    alignment_precision_at_k,
    generate_world,
    run_zero_shot_bench,
    write_world,
)
from sembridge.transplant import TransplantConfig, transplant
from sembridge.vocab import EMPTY_POLICY, compute_overlap


def criterion(num: int, name: str):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[FAIL] criterion {num}: {name}")
                raise
            print(f"\n[PASS] criterion {num}: {name}")

        return wrapper

    return deco


def sha(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def transplant_on(world, cfg, threads: int = 1):
    overlap = compute_overlap(world.source_vocab, world.target_vocab, EMPTY_POLICY)
    return transplant(
        world.source_emb,
        world.source_vocab,
        world.target_vocab,
        overlap,
        bridge_src=world.bridge_src,
        bridge_tgt=world.bridge_tgt,
        cfg=cfg,
        threads=threads,
    )


@criterion(1, "entmax bisection matches the grid-search oracle")
def test_entmax_oracle_suite():
    started = time.perf_counter()
    rng = np.random.default_rng(11)
    for _ in range(500):
        n = int(rng.integers(2, 9))
        s = rng.uniform(-1.0, 1.0, size=n)
        for alpha in (1.5, 3.0, 4.0):
            got = entmax_batch(s[None, :], EntmaxConfig(alpha=alpha))[0]
            np.testing.assert_allclose(got, grid_entmax(s, alpha), atol=1e-5)
    batch = rng.uniform(-1.0, 1.0, size=(1000, 100))
    np.testing.assert_allclose(
        entmax_batch(batch, EntmaxConfig(alpha=2.0)), sparsemax_batch(batch), atol=1e-7
    )
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"oracle suite took {elapsed:.1f}s"


@criterion(2, "simplex and equivariance properties hold in bulk")
def test_simplex_equivariance_suite():
    started = time.perf_counter()
    rng = np.random.default_rng(12)
    n = 16
    perm = rng.permutation(n)
    for alpha in (1.0, 2.0, 3.0, 4.0):
        s = rng.uniform(-4.0, 4.0, size=(10_000, n))
        p = entmax_batch(s, EntmaxConfig(alpha=alpha))
        assert (p >= 0.0).all()
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(
            entmax_batch(s[:, perm], EntmaxConfig(alpha=alpha)), p[:, perm], atol=1e-9
        )
        np.testing.assert_allclose(
            entmax_batch(s + 0.375, EntmaxConfig(alpha=alpha)), p, atol=1e-6
        )
        rows = np.arange(len(s))
        assert (p[rows, np.argmax(s, axis=1)] == p.max(axis=1)).all()
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"simplex suite took {elapsed:.1f}s"


@criterion(3, "transplant copies exactly and reports reconstruct rows")
def test_transplant_exactness(default_world):
    w = default_world
    identity = compute_overlap(w.source_vocab, w.source_vocab, EMPTY_POLICY)
    ident_matrix, _ = transplant(
        w.source_emb,
        w.source_vocab,
        w.source_vocab,
        identity,
        cfg=TransplantConfig(strategy="mean", seed=1),
    )
    assert np.array_equal(ident_matrix, w.source_emb)

    overlap = compute_overlap(w.source_vocab, w.target_vocab, EMPTY_POLICY)
    matrix, report = transplant_on(
        w, TransplantConfig(strategy="sembridge", alpha=4.0, seed=42)
    )
    for tid, sid in overlap.pairs.items():
        assert np.array_equal(matrix[tid], w.source_emb[sid])
    c = report.counts
    assert c["overlap_copied"] + c["synthesized"] + c["fallback"] == len(w.target_vocab)

    checked = 0
    for record in report.provenance:
        if record["kind"] != "weights":
            continue
        pairs = record["weights"]
        assert abs(sum(wt for _, wt in pairs) - 1.0) <= 1e-6
        recon = sum(wt * w.source_emb[sid].astype(np.float64) for sid, wt in pairs)
        np.testing.assert_allclose(
            matrix[record["target_id"]], recon.astype(np.float32), atol=1e-6
        )
        checked += 1
    assert checked == c["synthesized"]


@criterion(4, "one-hot similarity row copies the winning source row bit-exactly")
def test_one_hot_closed_form():
    p = entmax_batch(np.array([[1.0, -0.5]]), EntmaxConfig(alpha=4.0))[0]
    assert p[0] == 1.0 and p[1] == 0.0

    rng = np.random.default_rng(4)
    emb = rng.standard_normal((2, 16)).astype(np.float32)
    from sembridge.bridge import from_arrays
    from sembridge.vocab import Vocabulary

    src_vocab = Vocabulary(["a", "b"])
    tgt_vocab = Vocabulary(["c"])
    bsrc = from_arrays(
        src_vocab, np.array([[1.0, 0.0], [-0.5, np.sqrt(0.75)]], dtype=np.float32)
    )
    btgt = from_arrays(tgt_vocab, np.array([[1.0, 0.0]], dtype=np.float32))
    overlap = compute_overlap(src_vocab, tgt_vocab, EMPTY_POLICY)
    matrix, report = transplant(
        emb, src_vocab, tgt_vocab, overlap,
        bridge_src=bsrc, bridge_tgt=btgt,
        cfg=TransplantConfig(strategy="sembridge", alpha=4.0),
    )
    assert np.array_equal(matrix[0], emb[0])
    ((sid, wt),) = report.provenance[0]["weights"]
    assert (sid, wt) == (0, 1.0)


@criterion(5, "inverted-index search equals brute force on random corpora")
def test_retrieval_oracle_suite():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n_docs = int(rng.integers(1, 201))
        vocab = int(rng.integers(10, 501))
        corpus = {}
        for d in range(n_docs):
            n_terms = int(rng.integers(1, 12))
            toks = rng.choice(vocab, size=n_terms, replace=False)
            corpus[f"d{d}"] = {
                int(t): float(rng.uniform(0.05, 3.0)) for t in toks
            }
        index = build_index(
            SparseVector(id=did, entries=ent) for did, ent in corpus.items()
        )
        for qn in range(5):
            toks = rng.choice(vocab, size=int(rng.integers(1, 8)), replace=False)
            entries = {int(t): float(rng.uniform(0.05, 2.0)) for t in toks}
            got = search(index, SparseVector(id=f"q{qn}", entries=entries), k=10)
            want = brute_force_search(corpus, entries, k=10)
            assert [d for d, _ in got] == [d for d, _ in want]
            for (_, gs), (_, ws) in zip(got, want):
                assert abs(gs - ws) <= 1e-9

    run = {"q": [("d1", 3.0), ("d2", 2.0), ("d3", 1.0)]}
    assert ndcg_at_k(run, {"q": {"d1": 1}}, k=10).mean_ndcg == pytest.approx(1.0)
    assert ndcg_at_k(run, {"q": {"d3": 1}}, k=10).mean_ndcg == pytest.approx(0.5)
    queries = [SparseVector(id="q", entries={3: 0.5})]
    docs = [
        SparseVector(id="d1", entries={3: 1.0, 7: 2.0}),
        SparseVector(id="d2", entries={7: 1.0}),
    ]
    assert flops_metric(queries, docs) == pytest.approx(0.5)


@criterion(6, "strategies separate on the default synthetic world")
def test_synthetic_separation(default_world):
    started = time.perf_counter()
    configs = [
        TransplantConfig(strategy="sembridge", alpha=4.0, seed=42),
        TransplantConfig(strategy="sembridge", alpha=1.0, seed=42),
        TransplantConfig(strategy="multivariate", seed=42),
        TransplantConfig(strategy="random", seed=42),
    ]
    rows = run_zero_shot_bench(default_world, configs, k=10, threads=1)
    ndcg = {row.label: row.mean_ndcg for row in rows}
    assert ndcg["sembridge(alpha=4)"] - ndcg["multivariate"] > 0.05
    assert ndcg["multivariate"] - ndcg["random"] > 0.05
    assert ndcg["sembridge(alpha=4)"] >= ndcg["sembridge(alpha=1)"]
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0, f"separation bench took {elapsed:.1f}s"


@criterion(7, "alignment is perfect at zero bridge noise and degrades monotonically")
def test_zero_noise_alignment():
    precisions = []
    for sigma in (0.0, 0.1, 0.3, 0.6):
        world = generate_world(SyntheticLanguageSpec(noise_sigma=sigma))
        _, report = transplant_on(
            world, TransplantConfig(strategy="sembridge", alpha=4.0, seed=42)
        )
        precisions.append(alignment_precision_at_k(report, world.alignment, k=1))
    assert precisions[0] == 1.0
    for earlier, later in zip(precisions, precisions[1:]):
        assert later <= earlier, precisions


@criterion(8, "transplant and bench outputs are identical across thread counts")
def test_thread_determinism(tmp_path):
    world_dir = tmp_path / "world"
    spec = SyntheticLanguageSpec(n_source=300, n_target=80, docs=120, queries=40, seed=7)
    write_world(generate_world(spec), world_dir)

    outs = {}
    for threads in ("1", "8"):
        out = tmp_path / f"t{threads}.embm"
        report = tmp_path / f"t{threads}.json"
        code = main([
            "transplant",
            "--source-emb", str(world_dir / "source_emb.embm"),
            "--source-vocab", str(world_dir / "source_vocab.jsonl"),
            "--target-vocab", str(world_dir / "target_vocab.jsonl"),
            "--bridge-src", str(world_dir / "bridge_source.embm"),
            "--bridge-tgt", str(world_dir / "bridge_target.embm"),
            "--seed", "42", "--threads", threads,
            "--out", str(out), "--report", str(report),
        ])
        assert code == 0
        outs[threads] = (sha(out), sha(report))
    assert outs["1"] == outs["8"]

    benches = {}
    for threads in ("1", "8"):
        out = tmp_path / f"b{threads}.json"
        code = main([
            "bench", "--world", str(world_dir),
            "--strategies", "sembridge:4,mean",
            "--seed", "42", "--threads", threads,
            "--out", str(out),
        ])
        assert code == 0
        benches[threads] = sha(out)
    assert benches["1"] == benches["8"]


@criterion(9, "mean support size shrinks as alpha grows")
def test_sparsity_trend():
    rng = np.random.default_rng(9)
    s = rng.uniform(-1.0, 1.0, size=(1000, 100))
    means = [
        float((entmax_batch(s, EntmaxConfig(alpha=alpha)) > 0).sum(axis=1).mean())
        for alpha in (1.0, 2.0, 3.0, 4.0)
    ]
    assert means[0] == 100.0
    for earlier, later in zip(means, means[1:]):
        assert later < earlier, means
