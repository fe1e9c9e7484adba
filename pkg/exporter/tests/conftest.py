import json
import os

import pytest

# model fixtures are local directories; never touch the network
os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    d = tmp_path_factory.mktemp("tinybert")
    pieces = [
        "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
        "home", "house", "dog", "cat", "run", "walk",
        "##ing", "##s", "##ed",
        "a", "b", "c", "d", "e", "f", "g", "h",
    ]
    (d / "vocab.txt").write_text("\n".join(pieces) + "\n")
    tokenizer = BertTokenizer(str(d / "vocab.txt"))
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(pieces),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=32,
    )
    model = BertModel(config)
    tokenizer.save_pretrained(d)
    model.save_pretrained(d)
    return d


@pytest.fixture(scope="session")
def vocab_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("vocab")
    path = d / "target_vocab.jsonl"
    tokens = ["home", "##ing", " ", "dog", "▁house", "running"]
    path.write_text(
        "".join(
            json.dumps({"id": i, "token": t}, ensure_ascii=False) + "\n"
            for i, t in enumerate(tokens)
        ),
        encoding="utf-8",
    )
    return path
