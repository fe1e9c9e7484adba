"""Vocabularies, token normalization, overlap computation, and script statistics."""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

from .errors import FormatError, ValidationError

SCRIPT_CLASSES = (
    "Latin",
    "Arabic",
    "Han",
    "Devanagari",
    "Hangul",
    "Cyrillic",
    "Other-script",
    "ETC",
)

_NAME_PREFIXES = (
    ("LATIN", "Latin"),
    ("ARABIC", "Arabic"),
    ("CJK", "Han"),
    ("DEVANAGARI", "Devanagari"),
    ("HANGUL", "Hangul"),
    ("CYRILLIC", "Cyrillic"),
)


class Vocabulary:
    """An ordered token list with dense ids 0..size-1 and unique raw strings."""

    def __init__(self, tokens: Iterable[str]):
        toks = tuple(tokens)
        if not toks:
            raise ValidationError("a vocabulary must contain at least one token")
        index: dict[str, int] = {}
        for i, tok in enumerate(toks):
            if not isinstance(tok, str):
                raise ValidationError(f"token at id {i} is not a string: {tok!r}")
            if tok in index:
                raise ValidationError(f"duplicate token {tok!r} at ids {index[tok]} and {i}")
            index[tok] = i
        self.tokens = toks
        self.id_of = index

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, token_id: int) -> str:
        return self.tokens[token_id]

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    @classmethod
    def read_jsonl(cls, path) -> "Vocabulary":
        """Load from JSON-lines records ``{"id": int, "token": str}`` with dense ascending ids."""
        tokens: list[str] = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}, line {lineno + 1}: invalid JSON: {exc}") from exc
                if not isinstance(rec, dict) or "id" not in rec or "token" not in rec:
                    raise FormatError(f"{path}, line {lineno + 1}: expected id and token fields")
                if rec["id"] != len(tokens):
                    raise FormatError(
                        f"{path}, line {lineno + 1}: id {rec['id']} breaks dense ascending order,"
                        f" expected {len(tokens)}"
                    )
                tokens.append(rec["token"])
        return cls(tokens)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, tok in enumerate(self.tokens):
                fh.write(json.dumps({"id": i, "token": tok}, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class NormalizationPolicy:
    """Token normalization switches, applied in a fixed order.

    Order: Unicode NFKC, then strip the first matching subword marker once,
    then trim surrounding whitespace, then case fold.
    """

    case_fold: bool = False
    trim_whitespace: bool = False
    strip_subword_markers: tuple[str, ...] = ()
    apply_unicode_nfkc: bool = False

    def __post_init__(self):
        for marker in self.strip_subword_markers:
            if not marker:
                raise ValidationError("subword markers must be non-empty strings")

    def to_dict(self) -> dict:
        return {
            "case_fold": self.case_fold,
            "trim_whitespace": self.trim_whitespace,
            "strip_subword_markers": list(self.strip_subword_markers),
            "apply_unicode_nfkc": self.apply_unicode_nfkc,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationPolicy":
        return cls(
            case_fold=bool(d.get("case_fold", False)),
            trim_whitespace=bool(d.get("trim_whitespace", False)),
            strip_subword_markers=tuple(d.get("strip_subword_markers", ())),
            apply_unicode_nfkc=bool(d.get("apply_unicode_nfkc", False)),
        )


EMPTY_POLICY = NormalizationPolicy()


def normalize_token(token: str, policy: NormalizationPolicy) -> str:
    """Apply the policy to one token. May produce the empty string."""
    out = token
    if policy.apply_unicode_nfkc:
        out = unicodedata.normalize("NFKC", out)
    for marker in policy.strip_subword_markers:
        if out.startswith(marker):
            out = out[len(marker):]
            break
    if policy.trim_whitespace:
        out = out.strip()
    if policy.case_fold:
        out = out.casefold()
    return out


@dataclass(frozen=True)
class Conflict:
    """Several source tokens collapse to one normalized form."""

    normalized_form: str
    source_ids: tuple[int, ...]


@dataclass
class OverlapMap:
    """Target-to-source pairing under a normalization policy.

    ``pairs`` maps each matched target id to exactly one source id. Exact raw
    string matches outrank normalized matches; normalized ties resolve to the
    lowest source id. ``conflicts`` lists every normalized form shared by
    multiple source tokens.
    """

    pairs: dict[int, int]
    conflicts: list[Conflict] = field(default_factory=list)
    policy: NormalizationPolicy = EMPTY_POLICY

    def remaining(self, target_size: int) -> list[int]:
        """Target ids with no source pairing, ascending."""
        return [i for i in range(target_size) if i not in self.pairs]

    def to_dict(self, target_size: int | None = None) -> dict:
        d = {
            "pairs": {str(t): s for t, s in sorted(self.pairs.items())},
            "conflicts": [
                {"normalized_form": c.normalized_form, "source_ids": list(c.source_ids)}
                for c in self.conflicts
            ],
            "policy": self.policy.to_dict(),
        }
        if target_size is not None:
            d["remaining_count"] = target_size - len(self.pairs)
        return d


def compute_overlap(
    source: Vocabulary, target: Vocabulary, policy: NormalizationPolicy = EMPTY_POLICY
) -> OverlapMap:
    """Pair target tokens with source tokens by exact, then normalized, string identity.

    Tokens whose normalized form is empty never participate in normalized
    matching. Under the empty policy the result is the exact string
    intersection of the two vocabularies.
    """
    normalized_index: dict[str, list[int]] = {}
    for sid, tok in enumerate(source.tokens):
        form = normalize_token(tok, policy)
        if form:
            normalized_index.setdefault(form, []).append(sid)

    conflicts = [
        Conflict(form, tuple(ids))
        for form, ids in sorted(normalized_index.items())
        if len(ids) > 1
    ]

    pairs: dict[int, int] = {}
    for tid, tok in enumerate(target.tokens):
        exact = source.id_of.get(tok)
        if exact is not None:
            pairs[tid] = exact
            continue
        form = normalize_token(tok, policy)
        if not form:
            continue
        candidates = normalized_index.get(form)
        if candidates:
            pairs[tid] = candidates[0]
    return OverlapMap(pairs=pairs, conflicts=conflicts, policy=policy)


@lru_cache(maxsize=65536)
def _char_script(ch: str) -> str | None:
    """Script class of one character, or None for non-letters."""
    if not ch.isalpha():
        return None
    try:
        name = unicodedata.name(ch)
    except ValueError:
        return "Other-script"
    for prefix, script in _NAME_PREFIXES:
        if name.startswith(prefix):
            return script
    return "Other-script"


def token_script(token: str) -> str:
    """Majority script among a token's letters; tokens without letters fall into ETC.

    Ties resolve to the script reached first while scanning the token.
    """
    counts: dict[str, int] = {}
    order: dict[str, int] = {}
    for pos, ch in enumerate(token):
        script = _char_script(ch)
        if script is None:
            continue
        counts[script] = counts.get(script, 0) + 1
        order.setdefault(script, pos)
    if not counts:
        return "ETC"
    return max(counts, key=lambda s: (counts[s], -order[s]))


def script_distribution(vocab: Vocabulary) -> dict[str, int]:
    """Token counts per script class. Counts always sum to the vocabulary size."""
    dist = {script: 0 for script in SCRIPT_CLASSES}
    for tok in vocab.tokens:
        dist[token_script(tok)] += 1
    return dist
