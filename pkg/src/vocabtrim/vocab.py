"""Tokenization, calibration token counting, trimmed-vocabulary selection and
the draft-index <-> target-index mapping.
"""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    EmptyCorpus,
    EmptyResult,
    FormatError,
    IdOutOfRange,
    KTooSmall,
    LengthMismatch,
)

UNK = "<unk>"
EOS = "</s>"
ABSENT = -1

__all__ = [
    "ABSENT",
    "EOS",
    "UNK",
    "Vocabulary",
    "FrequencyCounter",
    "TopK",
    "TopP",
    "MinFreq",
    "TrimSelection",
    "VocabMapping",
    "tokenize",
    "build_vocab",
    "count_token_frequencies",
    "merge_counters",
    "select_trim",
    "build_mapping",
    "parse_criterion",
    "write_counter",
    "read_counter",
    "write_selection",
    "read_selection",
]


def _frozen(a, dtype=np.int64):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Vocabulary:
    """Dense token table. ``UNK`` and ``EOS`` are always present and special."""

    tokens: tuple
    id_of: dict = field(repr=False, compare=False)
    special: frozenset
    unk_id: int
    eos_id: int

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        tokens = tuple(tokens)
        id_of = {t: i for i, t in enumerate(tokens)}
        if len(id_of) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if UNK not in id_of or EOS not in id_of:
            raise ValueError(f"vocabulary must contain {UNK!r} and {EOS!r}")
        unk, eos = id_of[UNK], id_of[EOS]
        return cls(tokens, id_of, frozenset((unk, eos)), unk, eos)

    def __len__(self):
        return len(self.tokens)

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)

    def save(self, path):
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_tokens(Path(path).read_text(encoding="utf-8").split("\n")[:-1])


def _words(text: str):
    return text.lower().split()


def tokenize(text: str, vocab: Vocabulary, add_eos: bool = True) -> list[int]:
    """Whitespace split, lowercase, unknown words -> UNK, then EOS."""
    get, unk = vocab.id_of.get, vocab.unk_id
    ids = [get(w, unk) for w in _words(text)]
    if add_eos:
        ids.append(vocab.eos_id)
    return ids


def build_vocab(corpus: Iterable[str], max_size: int) -> Vocabulary:
    """Keep the ``max_size - 2`` most frequent words, then UNK and EOS.

    Frequency ties are broken by the token string so the table is a pure
    function of the corpus.
    """
    if max_size < 3:
        raise ValueError("max_size must be >= 3")
    freq = Counter()
    for text in corpus:
        freq.update(w for w in _words(text) if w not in (UNK, EOS))
    if not freq:
        raise EmptyCorpus("no tokens observed in corpus")
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    words = [w for w, _ in ranked[: max_size - 2]]
    return Vocabulary.from_tokens(words + [UNK, EOS])


@dataclass(frozen=True)
class FrequencyCounter:
    counts: np.ndarray
    total: int

    def __post_init__(self):
        object.__setattr__(self, "counts", _frozen(self.counts))
        if (self.counts < 0).any():
            raise ValueError("negative count")
        if int(self.counts.sum()) != self.total:
            raise ValueError("total does not match sum of counts")

    @property
    def V(self) -> int:
        return len(self.counts)

    @classmethod
    def zeros(cls, V: int) -> "FrequencyCounter":
        return cls(np.zeros(V, dtype=np.int64), 0)

    def serialize(self) -> str:
        lines = [f"vocabtrim-counter v1 V={self.V} total={self.total}\n"]
        for i in np.flatnonzero(self.counts):
            lines.append(f"{i}\t{self.counts[i]}\n")
        return "".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, FrequencyCounter):
            return NotImplemented
        return self.total == other.total and np.array_equal(self.counts, other.counts)

    __hash__ = None


def count_token_frequencies(token_streams: Iterable[Sequence[int]], V: int) -> FrequencyCounter:
    counts = np.zeros(V, dtype=np.int64)
    for stream in token_streams:
        ids = np.asarray(stream, dtype=np.int64)
        if ids.size == 0:
            continue
        if ids.min() < 0 or ids.max() >= V:
            bad = ids[(ids < 0) | (ids >= V)][0]
            raise IdOutOfRange(f"token id {bad} outside [0, {V})")
        counts += np.bincount(ids, minlength=V)
    return FrequencyCounter(counts, int(counts.sum()))


def merge_counters(a: FrequencyCounter, b: FrequencyCounter) -> FrequencyCounter:
    if a.V != b.V:
        raise LengthMismatch(f"counter lengths differ: {a.V} vs {b.V}")
    return FrequencyCounter(a.counts + b.counts, a.total + b.total)


@dataclass(frozen=True)
class TopK:
    k: int


@dataclass(frozen=True)
class TopP:
    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("TopP.p must lie in (0, 1]")


@dataclass(frozen=True)
class MinFreq:
    f: int

    def __post_init__(self):
        if self.f < 1:
            raise ValueError("MinFreq.f must be >= 1")


TrimCriterion = Union[TopK, TopP, MinFreq]


def parse_criterion(text: str, V: int | None = None) -> TrimCriterion:
    """Parse ``topk:500``, ``topk:0.25v`` (fraction of V), ``topp:0.9`` or ``minfreq:3``."""
    kind, _, value = text.strip().lower().partition(":")
    try:
        if kind == "topk":
            if value.endswith("v"):
                if V is None:
                    raise ValueError("fractional top-k needs the vocabulary size")
                return TopK(max(1, round(float(value[:-1]) * V)))
            return TopK(int(value))
        if kind == "topp":
            return TopP(float(value))
        if kind == "minfreq":
            return MinFreq(int(value))
    except ValueError as exc:
        raise ValueError(f"bad trim criterion {text!r}: {exc}") from None
    raise ValueError(f"unknown trim criterion {text!r}")


@dataclass(frozen=True)
class TrimSelection:
    kept: np.ndarray
    source_counter_digest: str

    def __post_init__(self):
        object.__setattr__(self, "kept", _frozen(self.kept))
        if self.kept.size and (np.diff(self.kept) <= 0).any():
            raise ValueError("kept ids must be strictly increasing")

    @property
    def K(self) -> int:
        return len(self.kept)

    def serialize(self, V: int) -> str:
        head = f"vocabtrim-select v1 V={V} K={self.K} digest={self.source_counter_digest}\n"
        return head + "".join(f"{i}\n" for i in self.kept)

    def __eq__(self, other):
        if not isinstance(other, TrimSelection):
            return NotImplemented
        return (self.source_counter_digest == other.source_counter_digest
                and np.array_equal(self.kept, other.kept))

    __hash__ = None


def _rank(counts: np.ndarray) -> np.ndarray:
    # count descending, then id ascending
    ids = np.arange(len(counts))
    return np.lexsort((ids, -counts))


def select_trim(counter: FrequencyCounter, criterion: TrimCriterion,
                special: Iterable[int] = (), allow_empty: bool = False) -> TrimSelection:
    """Choose the kept token ids. Special ids are always kept.

    With ``TopK`` the result has exactly ``k`` ids: specials displace the
    lowest-ranked ordinary picks. ``TopP`` and ``MinFreq`` add specials on top
    of their own picks; if they pick no ordinary token at all ``EmptyResult``
    is raised unless ``allow_empty``.
    """
    V = counter.V
    special = sorted(set(int(s) for s in special))
    if special and (special[0] < 0 or special[-1] >= V):
        raise IdOutOfRange("special id outside the vocabulary")
    is_special = np.zeros(V, dtype=bool)
    is_special[special] = True
    counts = counter.counts
    order = _rank(counts)

    if isinstance(criterion, TopK):
        if not 1 <= criterion.k <= V:
            raise ValueError(f"TopK.k must lie in [1, {V}]")
        if criterion.k < len(special):
            raise KTooSmall(f"k={criterion.k} < {len(special)} special tokens")
        ordinary = order[~is_special[order]]
        picks = ordinary[: criterion.k - len(special)]
    elif isinstance(criterion, TopP):
        if counter.total == 0:
            raise EmptyResult("TopP selection on an empty counter")
        cum = np.cumsum(counts[order])
        n = int(np.searchsorted(cum >= criterion.p * counter.total, True)) + 1
        picks = order[:n]
        picks = picks[~is_special[picks]]
    elif isinstance(criterion, MinFreq):
        if counter.total == 0:
            raise EmptyResult("MinFreq selection on an empty counter")
        picks = np.flatnonzero((counts >= criterion.f) & ~is_special)
    else:
        raise TypeError(f"unknown criterion {criterion!r}")

    if not isinstance(criterion, TopK) and picks.size == 0 and not allow_empty:
        raise EmptyResult(f"{criterion} selected no tokens beyond the special set")
    kept = np.union1d(picks, np.array(special, dtype=np.int64))
    return TrimSelection(kept, counter.digest())


@dataclass(frozen=True)
class VocabMapping:
    """``to_target[i]`` is the target id of trimmed index ``i``;
    ``to_trim[t]`` is the trimmed index of target id ``t`` or ``ABSENT``."""

    to_target: np.ndarray
    to_trim: np.ndarray

    @property
    def K(self) -> int:
        return len(self.to_target)

    @property
    def V(self) -> int:
        return len(self.to_trim)

    @classmethod
    def identity(cls, V: int) -> "VocabMapping":
        return build_mapping(TrimSelection(np.arange(V), ""), V)


def build_mapping(selection: TrimSelection, V: int) -> VocabMapping:
    kept = selection.kept
    if kept.size and (kept[0] < 0 or kept[-1] >= V):
        raise IdOutOfRange(f"selection holds ids outside [0, {V})")
    to_trim = np.full(V, ABSENT, dtype=np.int64)
    to_trim[kept] = np.arange(len(kept))
    return VocabMapping(_frozen(kept), _frozen(to_trim))


# -- artifact files -----------------------------------------------------------

def _header(line: str, magic: str) -> dict:
    parts = line.split(" ")
    if parts[:2] != [magic, "v1"]:
        raise FormatError(f"expected {magic} v1 header, got {line!r}")
    out = {}
    for p in parts[2:]:
        key, _, val = p.partition("=")
        out[key] = val
    return out


def write_counter(path, counter: FrequencyCounter):
    Path(path).write_bytes(counter.serialize().encode("utf-8"))


def read_counter(path) -> FrequencyCounter:
    lines = Path(path).read_bytes().decode("utf-8").split("\n")
    head = _header(lines[0], "vocabtrim-counter")
    try:
        V, total = int(head["V"]), int(head["total"])
        counts = np.zeros(V, dtype=np.int64)
        for line in lines[1:]:
            if line:
                i, c = line.split("\t")
                counts[int(i)] = int(c)
    except (KeyError, ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed counter file ({exc})") from None
    if int(counts.sum()) != total:
        raise FormatError(f"{path}: total={total} but counts sum to {counts.sum()}")
    return FrequencyCounter(counts, total)


def write_selection(path, selection: TrimSelection, V: int):
    Path(path).write_bytes(selection.serialize(V).encode("utf-8"))


def read_selection(path, counter: FrequencyCounter | None = None) -> tuple[TrimSelection, int]:
    """Return ``(selection, V)``. Passing the counter checks the digest."""
    lines = Path(path).read_bytes().decode("utf-8").split("\n")
    head = _header(lines[0], "vocabtrim-select")
    try:
        V, K, digest = int(head["V"]), int(head["K"]), head["digest"]
        kept = [int(x) for x in lines[1:] if x]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed selection file ({exc})") from None
    if len(kept) != K:
        raise FormatError(f"{path}: header K={K} but {len(kept)} ids listed")
    if counter is not None and counter.digest() != digest:
        raise FormatError(f"{path}: selection was derived from a different counter")
    return TrimSelection(np.array(kept, dtype=np.int64), digest), V
