import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sembridge.errors import FormatError, ValidationError
from sembridge.vocab import (
    EMPTY_POLICY,
    SCRIPT_CLASSES,
    NormalizationPolicy,
    Vocabulary,
    compute_overlap,
    normalize_token,
    script_distribution,
    token_script,
)

CASEFOLD = NormalizationPolicy(case_fold=True)


def test_normalize_examples():
    assert normalize_token("HOME", CASEFOLD) == "home"
    assert normalize_token("##ing", NormalizationPolicy(strip_subword_markers=("##",))) == "ing"
    assert normalize_token(" 2024 ", NormalizationPolicy(trim_whitespace=True)) == "2024"


def test_normalize_order_marker_before_trim():
    policy = NormalizationPolicy(trim_whitespace=True, strip_subword_markers=("##",))
    # marker stripping sees the raw leading text before the trim
    assert normalize_token("##  x", policy) == "x"


def test_normalize_idempotent_without_markers():
    policy = NormalizationPolicy(case_fold=True, trim_whitespace=True, apply_unicode_nfkc=True)
    for token in ["HOME", " Ab ", "ＨＯＭＥ", "ß", "2024"]:
        once = normalize_token(token, policy)
        assert normalize_token(once, policy) == once


def test_policy_requires_nonempty_markers():
    with pytest.raises(ValidationError):
        NormalizationPolicy(strip_subword_markers=("",))


def test_overlap_worked_example():
    src = Vocabulary(["home", "##ing", "2024"])
    tgt = Vocabulary(["HOME", "2024", "집"])
    overlap = compute_overlap(src, tgt, CASEFOLD)
    assert overlap.pairs == {0: 0, 1: 2}
    assert overlap.remaining(len(tgt)) == [2]
    assert overlap.conflicts == []


def test_overlap_identity():
    vocab = Vocabulary(["a", "b", "c"])
    overlap = compute_overlap(vocab, vocab, EMPTY_POLICY)
    assert overlap.pairs == {0: 0, 1: 1, 2: 2}
    assert overlap.remaining(3) == []


def test_overlap_conflict_logged_lowest_id_wins():
    src = Vocabulary(["Ab", "ab"])
    tgt = Vocabulary(["AB"])
    overlap = compute_overlap(src, tgt, CASEFOLD)
    assert overlap.pairs == {0: 0}
    assert len(overlap.conflicts) == 1
    assert overlap.conflicts[0].normalized_form == "ab"
    assert overlap.conflicts[0].source_ids == (0, 1)


def test_exact_match_beats_normalized():
    src = Vocabulary(["AB", "ab"])
    tgt = Vocabulary(["ab"])
    overlap = compute_overlap(src, tgt, CASEFOLD)
    # raw string match to id 1 wins over the normalized tie at id 0
    assert overlap.pairs == {0: 1}


def test_marker_only_tokens_never_alias():
    policy = NormalizationPolicy(strip_subword_markers=("##", "@@"))
    src = Vocabulary(["##"])
    tgt = Vocabulary(["@@"])
    overlap = compute_overlap(src, tgt, policy)
    assert overlap.pairs == {}


tokens_strategy = st.lists(
    st.text(alphabet="abAB12", min_size=1, max_size=3), min_size=1, max_size=12, unique=True
)


@given(tokens_strategy, tokens_strategy)
def test_empty_policy_is_exact_intersection(src_tokens, tgt_tokens):
    src = Vocabulary(src_tokens)
    tgt = Vocabulary(tgt_tokens)
    overlap = compute_overlap(src, tgt, EMPTY_POLICY)
    expected = {
        tid: src.id_of[tok] for tid, tok in enumerate(tgt_tokens) if tok in src.id_of
    }
    assert overlap.pairs == expected


@given(tokens_strategy, tokens_strategy)
def test_every_target_id_covered_once(src_tokens, tgt_tokens):
    src = Vocabulary(src_tokens)
    tgt = Vocabulary(tgt_tokens)
    overlap = compute_overlap(src, tgt, CASEFOLD)
    remaining = set(overlap.remaining(len(tgt)))
    assert remaining.isdisjoint(overlap.pairs.keys())
    assert remaining | set(overlap.pairs.keys()) == set(range(len(tgt)))


def test_overlap_report_shape():
    src = Vocabulary(["Ab", "ab"])
    tgt = Vocabulary(["AB", "zz"])
    d = compute_overlap(src, tgt, CASEFOLD).to_dict(target_size=2)
    assert set(d) == {"pairs", "conflicts", "remaining_count", "policy"}
    assert d["remaining_count"] == 1
    assert d["policy"]["case_fold"] is True


# -- vocabulary file format ---------------------------------------------------


def test_vocab_jsonl_round_trip(tmp_path):
    vocab = Vocabulary(["home", "집", "дом"])
    path = tmp_path / "v.jsonl"
    vocab.write_jsonl(path)
    assert Vocabulary.read_jsonl(path) == vocab
    lines = path.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[1]) == {"id": 1, "token": "집"}


def test_vocab_jsonl_requires_dense_ascending_ids(tmp_path):
    path = tmp_path / "v.jsonl"
    path.write_text('{"id": 0, "token": "a"}\n{"id": 2, "token": "b"}\n', encoding="utf-8")
    with pytest.raises(FormatError, match="dense ascending"):
        Vocabulary.read_jsonl(path)


def test_vocab_rejects_duplicates_and_empty():
    with pytest.raises(ValidationError):
        Vocabulary(["a", "a"])
    with pytest.raises(ValidationError):
        Vocabulary([])


# -- script classification -----------------------------------------------------


def test_script_examples():
    assert token_script("집") == "Hangul"
    assert token_script("2024") == "ETC"
    dist = script_distribution(Vocabulary(["дом", "home", "##s"]))
    assert dist["Cyrillic"] == 1
    assert dist["Latin"] == 2


def test_script_majority_and_tie():
    assert token_script("手home") == "Latin"  # 4 latin letters beat 1 han
    assert token_script("手h") == "Han"  # tie resolves to the earliest letter


def test_script_other_bucket():
    assert token_script("νερό") == "Other-script"  # greek letters are none of the named six


@given(st.lists(st.text(min_size=1, max_size=4), min_size=1, max_size=20, unique=True))
def test_script_counts_sum_to_vocab_size(tokens):
    vocab = Vocabulary(tokens)
    dist = script_distribution(vocab)
    assert set(dist) == set(SCRIPT_CLASSES)
    assert sum(dist.values()) == len(vocab)
