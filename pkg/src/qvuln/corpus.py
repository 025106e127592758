"""Labeled code corpora: CSV loading, class balancing, code-aware
tokenization, vocabulary construction, and fixed-length integer encoding.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

PAD_INDEX = 0
OOV_INDEX = 1

SPLITS = ("train", "validation", "test")

# maximal-munch operator inventory: two-character operators first, then
# single punctuation characters; everything else stays a whole token
TWO_CHAR_OPS = ("==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "++", "--",
                "+=", "-=", "*=", "/=", "->", "::")
SINGLE_CHARS = set("(){}[];,.<>=+-*/%&|^!~?:#\"'")


@dataclass
class LabeledCorpus:
    """Code samples with binary labels for one dataset split."""

    samples: list[tuple[str, int]]
    split: str

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class Vocabulary:
    """Token-to-index map; 0 is padding, 1 is out-of-vocabulary, real tokens
    start at 2 ranked by descending frequency (ties: first occurrence)."""

    tokens: list[str]
    token_to_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.token_to_index = {t: k + 2 for k, t in enumerate(self.tokens)}
        if len(self.token_to_index) != len(self.tokens):
            raise DataError("vocabulary tokens must be unique")

    @property
    def size(self) -> int:
        """Count of real tokens (excludes padding and OOV)."""
        return len(self.tokens)

    @property
    def n_rows(self) -> int:
        """Row count for an aligned embedding matrix (V + 2)."""
        return len(self.tokens) + 2

    def index_of(self, token: str) -> int:
        return self.token_to_index.get(token, OOV_INDEX)

    def token_of(self, index: int) -> str:
        if not 2 <= index < self.n_rows:
            raise DataError(f"index {index} has no token (valid range 2..{self.n_rows - 1})")
        return self.tokens[index - 2]

    def digest(self) -> str:
        """sha256 over the ordered token list; identifies the vocabulary."""
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {"format": "vocab.v1", "tokens": list(self.tokens), "digest": self.digest()}

    @classmethod
    def from_dict(cls, data: dict) -> Vocabulary:
        if data.get("format") != "vocab.v1":
            raise DataError(f"unsupported vocabulary format {data.get('format')!r}")
        vocab = cls(tokens=list(data["tokens"]))
        digest = data.get("digest")
        if digest is not None and digest != vocab.digest():
            raise DataError("vocabulary digest mismatch")
        return vocab


@dataclass
class EncodedSequence:
    """Fixed-length index sequence; positions >= true_length are padding."""

    indices: np.ndarray
    true_length: int


def normalize_code(text: str) -> str:
    """Replace literal backslash-n escape artifacts with spaces and strip."""
    return text.replace("\\n", " ").strip()


def load_dataset(path: str | Path, split: str) -> LabeledCorpus:
    """Parse a `code,label` CSV into a corpus; data rows are numbered from 1
    in error messages."""
    if split not in SPLITS:
        raise DataError(f"unknown split {split!r}; expected one of {SPLITS}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    samples: list[tuple[str, int]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header code,label") from None
        if [h.strip() for h in header] != ["code", "label"]:
            raise DataError(f"{path}: expected header code,label, got {','.join(header)}")
        for row_num, row in enumerate(reader, start=1):
            if len(row) != 2:
                raise DataError(f"{path}: row {row_num}: expected 2 fields, got {len(row)}")
            code = normalize_code(row[0])
            if not code:
                raise DataError(f"{path}: row {row_num}: code is empty after normalization")
            label_text = row[1].strip()
            if label_text not in ("0", "1"):
                raise DataError(f"{path}: row {row_num}: label must be 0 or 1, got {row[1]!r}")
            samples.append((code, int(label_text)))
    return LabeledCorpus(samples=samples, split=split)


def balance(corpus: LabeledCorpus, seed: int) -> LabeledCorpus:
    """Down-sample the majority class to the minority count (seeded choice
    without replacement), then return a seeded shuffle of the result."""
    if len(corpus) == 0:
        raise DataError("cannot balance an empty corpus")
    pos = [k for k, (_, y) in enumerate(corpus.samples) if y == 1]
    neg = [k for k, (_, y) in enumerate(corpus.samples) if y == 0]
    if not pos or not neg:
        raise DataError(f"cannot balance a single-class corpus (split {corpus.split!r})")
    rng = np.random.default_rng(seed)
    n = min(len(pos), len(neg))
    if len(pos) > n:
        pos = sorted(rng.choice(np.array(pos), size=n, replace=False).tolist())
    if len(neg) > n:
        neg = sorted(rng.choice(np.array(neg), size=n, replace=False).tolist())
    kept = sorted(pos + neg)
    order = rng.permutation(len(kept))
    samples = [corpus.samples[kept[j]] for j in order]
    return LabeledCorpus(samples=samples, split=corpus.split)


def _strip_comments_and_literals(text: str) -> str:
    """Drop comment text and string/char literal contents; literals become
    space-delimited placeholder tokens so later splitting keeps them whole."""
    out: list[str] = []
    k = 0
    n = len(text)
    while k < n:
        ch = text[k]
        nxt = text[k + 1] if k + 1 < n else ""
        if ch == "/" and nxt == "/":
            while k < n and text[k] != "\n":
                k += 1
            out.append(" ")
        elif ch == "/" and nxt == "*":
            k += 2
            while k + 1 < n and not (text[k] == "*" and text[k + 1] == "/"):
                k += 1
            k = min(k + 2, n)
            out.append(" ")
        elif ch == '"' or ch == "'":
            quote = ch
            k += 1
            while k < n and text[k] != quote:
                k += 2 if text[k] == "\\" else 1
            k = min(k + 1, n)
            out.append(f" {quote}{quote} ")
        else:
            out.append(ch)
            k += 1
    return "".join(out)


def _split_chunk(chunk: str) -> list[str]:
    """Maximal-munch split of one whitespace-free chunk."""
    if chunk in ("''", '""'):
        return [chunk]
    tokens: list[str] = []
    word: list[str] = []
    k = 0
    n = len(chunk)
    while k < n:
        pair = chunk[k : k + 2]
        if pair in TWO_CHAR_OPS:
            if word:
                tokens.append("".join(word))
                word = []
            tokens.append(pair)
            k += 2
        elif chunk[k] in SINGLE_CHARS:
            if word:
                tokens.append("".join(word))
                word = []
            tokens.append(chunk[k])
            k += 1
        else:
            word.append(chunk[k])
            k += 1
    if word:
        tokens.append("".join(word))
    return tokens


def tokenize(code_text: str) -> list[str]:
    """Whitespace split after comment/literal stripping, then operator and
    punctuation separation; identifiers and numeric literals stay whole."""
    tokens: list[str] = []
    for chunk in _strip_comments_and_literals(code_text).split():
        tokens.extend(_split_chunk(chunk))
    return tokens


def build_vocab(corpus: LabeledCorpus, max_vocab: int) -> Vocabulary:
    """Rank tokens by descending frequency (first occurrence breaks ties) and
    keep the top max_vocab."""
    if max_vocab < 1:
        raise DataError(f"max_vocab must be >= 1, got {max_vocab}")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    for code, _ in corpus.samples:
        for token in tokenize(code):
            if token not in counts:
                first_seen[token] = len(first_seen)
                counts[token] = 0
            counts[token] += 1
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(tokens=ranked[:max_vocab])


def encode_and_pad(tokens: list[str], vocab: Vocabulary, max_len: int) -> EncodedSequence:
    """Map tokens to indices (unknown -> 1), keep the last max_len on
    overflow, pad the tail with 0 otherwise."""
    if max_len < 1:
        raise DataError(f"max_len must be >= 1, got {max_len}")
    ids = [vocab.index_of(t) for t in tokens[-max_len:]]
    true_length = len(ids)
    ids.extend([PAD_INDEX] * (max_len - true_length))
    return EncodedSequence(indices=np.asarray(ids, dtype=np.int64), true_length=true_length)
