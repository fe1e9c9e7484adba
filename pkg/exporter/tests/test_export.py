import json

import numpy as np
import pytest

from bridge_exporter.cli import main
from bridge_exporter.export import export_vocab_embeddings, render_token
from bridge_exporter.formats import VocabError, read_vocab


def export(vocab_file, model_dir, out_dir, **kwargs):
    return export_vocab_embeddings(
        vocab_file,
        model_dir,
        out_dir / "bridge.embm",
        out_dir / "manifest.json",
        **kwargs,
    )


def test_render_token_examples():
    assert render_token("home") == "home"
    assert render_token("##ing") == "ing"
    assert render_token("▁house") == "house"
    assert render_token("Ġdog") == "dog"
    assert render_token("walk</w>") == "walk"
    assert render_token("##") == ""
    assert render_token(" ") == ""
    assert render_token("▁") == ""


def test_vocab_reader_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": 1, "token": "a"}\n')
    with pytest.raises(VocabError, match="dense ascending"):
        read_vocab(bad)
    bad.write_text('{"id": 0, "token": "a"}\n{"id": 1, "token": "a"}\n')
    with pytest.raises(VocabError, match="duplicate"):
        read_vocab(bad)
    bad.write_text("not json\n")
    with pytest.raises(VocabError, match="not valid JSON"):
        read_vocab(bad)
    with pytest.raises(VocabError):
        read_vocab(tmp_path / "missing.jsonl")


def test_export_contract(tiny_model_dir, vocab_file, tmp_path):
    manifest = export(vocab_file, tiny_model_dir, tmp_path, batch_size=3)
    payload = json.loads((tmp_path / "manifest.json").read_text())
    assert payload["dim"] == manifest.dim == 16
    assert payload["rows"] == 6
    assert payload["unencodable_ids"] == [2]  # the whitespace-only token
    assert payload["unencodable_count"] == 1
    assert payload["normalized"] is True
    assert payload["model"] == str(tiny_model_dir)
    assert "mean" in payload["pooling"]

    from sembridge import densevec

    matrix = densevec.read_matrix(tmp_path / "bridge.embm")
    assert matrix.shape == (6, 16)
    assert matrix.dtype == np.float32
    assert not matrix[2].any()
    nonzero = [i for i in range(6) if i != 2]
    norms = np.linalg.norm(matrix[nonzero].astype(np.float64), axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-4)


def test_load_bridge_accepts_export(tiny_model_dir, vocab_file, tmp_path):
    manifest = export(vocab_file, tiny_model_dir, tmp_path)

    from sembridge.bridge import load_bridge

    bridge, missing = load_bridge(vocab_file, tmp_path / "bridge.embm")
    assert set(missing) == set(manifest.unencodable_ids)
    assert bridge.matrix.shape == (manifest.rows, manifest.dim)


def test_reexport_rows_are_stable(tiny_model_dir, vocab_file, tmp_path):
    from sembridge import densevec

    runs = []
    for name, batch in (("r1", 2), ("r2", 6)):
        d = tmp_path / name
        d.mkdir()
        export(vocab_file, tiny_model_dir, d, batch_size=batch)
        runs.append(densevec.read_matrix(d / "bridge.embm"))
    a, b = (m.astype(np.float64) for m in runs)
    for i in range(a.shape[0]):
        if not a[i].any():
            assert not b[i].any()
            continue
        cos = float(a[i] @ b[i])  # rows are unit-norm already
        assert cos >= 0.999, f"row {i} drifted: cosine {cos}"


def test_transplant_runs_on_exported_bridges(tiny_model_dir, vocab_file, tmp_path):
    # source side: embed the model's own wordpieces as a source vocabulary
    src_vocab = tmp_path / "source_vocab.jsonl"
    tokens = ["home", "house", "dog", "cat", "run", "walk"]
    src_vocab.write_text(
        "".join(
            json.dumps({"id": i, "token": t}) + "\n" for i, t in enumerate(tokens)
        )
    )
    export_vocab_embeddings(
        src_vocab, tiny_model_dir, tmp_path / "bsrc.embm", tmp_path / "msrc.json"
    )
    export_vocab_embeddings(
        vocab_file, tiny_model_dir, tmp_path / "btgt.embm", tmp_path / "mtgt.json"
    )

    rng = np.random.default_rng(0)
    from sembridge import densevec

    densevec.write_matrix(
        rng.standard_normal((6, 8)).astype(np.float32), tmp_path / "src_emb.embm"
    )
    from sembridge.cli import main as sembridge_cli

    code = sembridge_cli([
        "transplant",
        "--source-emb", str(tmp_path / "src_emb.embm"),
        "--source-vocab", str(src_vocab),
        "--target-vocab", str(vocab_file),
        "--bridge-src", str(tmp_path / "bsrc.embm"),
        "--bridge-tgt", str(tmp_path / "btgt.embm"),
        "--out", str(tmp_path / "out.embm"),
        "--report", str(tmp_path / "report.json"),
    ])
    assert code == 0
    out = densevec.read_matrix(tmp_path / "out.embm")
    assert out.shape == (6, 8)
    report = json.loads((tmp_path / "report.json").read_text())
    kinds = [rec["kind"] for rec in report["provenance"]]
    assert kinds.count("copied") == 2  # "home" and "dog" overlap
    assert np.array_equal(out[0], densevec.read_matrix(tmp_path / "src_emb.embm")[0])


def test_cli_success_and_exit_codes(tiny_model_dir, vocab_file, tmp_path, capsys):
    code = main([
        "export",
        "--vocab", str(vocab_file),
        "--model", str(tiny_model_dir),
        "--out", str(tmp_path / "b.embm"),
        "--manifest", str(tmp_path / "m.json"),
        "--batch-size", "4",
    ])
    assert code == 0
    assert "wrote" in capsys.readouterr().out
    assert (tmp_path / "b.embm").exists()
    assert (tmp_path / "m.json").exists()


def test_cli_vocab_failure_is_exit_2(tiny_model_dir, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    code = main([
        "export",
        "--vocab", str(bad),
        "--model", str(tiny_model_dir),
        "--out", str(tmp_path / "b.embm"),
        "--manifest", str(tmp_path / "m.json"),
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("bridge-exporter: error: VocabError:")
    assert err.count("\n") == 1


def test_cli_model_failure_is_exit_3(vocab_file, tmp_path, capsys):
    code = main([
        "export",
        "--vocab", str(vocab_file),
        "--model", str(tmp_path / "no_such_model"),
        "--out", str(tmp_path / "b.embm"),
        "--manifest", str(tmp_path / "m.json"),
    ])
    assert code == 3
    assert capsys.readouterr().err.startswith("bridge-exporter: error: ModelLoadError:")


def test_cli_bad_batch_size_is_exit_2(tiny_model_dir, vocab_file, tmp_path, capsys):
    code = main([
        "export",
        "--vocab", str(vocab_file),
        "--model", str(tiny_model_dir),
        "--out", str(tmp_path / "b.embm"),
        "--manifest", str(tmp_path / "m.json"),
        "--batch-size", "0",
    ])
    assert code == 2
    assert "batch size" in capsys.readouterr().err
