"""Deterministic desk-scale language models.

Two families share the ``next_logits`` / ``param_count`` / ``vocab_size``
surface:

* :class:`NGramModel` -- add-alpha smoothed n-gram with longest-suffix backoff.
* :class:`LinearHeadModel` -- embedding lookup, per-dimension mixing over the
  last ``m`` positions, and an explicit ``V x d`` LM head.

:func:`trim_head` keeps only the selected rows of a model's output layer and
returns a :class:`TrimmedHeadModel` scoring in trimmed index space.
"""
from __future__ import annotations

import hashlib
import struct
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .errors import EmptyCorpus, FormatError, IdOutOfRange
from .vocab import TrimSelection, VocabMapping, build_mapping

MAGIC = b"VTLM1"
_TAG_LINEAR = 1
_TAG_NGRAM = 2
_TRIPLE = np.dtype([("ctx", "<u8"), ("token", "<i8"), ("count", "<i8")])


@runtime_checkable
class LanguageModel(Protocol):
    def next_logits(self, context: Sequence[int]) -> np.ndarray: ...

    def param_count(self) -> int: ...

    def vocab_size(self) -> int: ...


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


def greedy_token(model: LanguageModel, context: Sequence[int]) -> int:
    # np.argmax returns the first maximum: ties go to the smallest id
    return int(np.argmax(model.next_logits(context)))


def top_k_indices(x: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest entries, ordered by value desc then index asc."""
    n = len(x)
    if k >= n:
        return np.lexsort((np.arange(n), -x))
    part = np.argpartition(-x, k - 1)[:k]
    cand = np.flatnonzero(x >= x[part].min())
    return cand[np.lexsort((cand, -x[cand]))][:k]


def head_logits(W: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``W @ h`` with a per-row reduction, so ``head_logits(W[rows], h)`` equals
    ``head_logits(W, h)[rows]`` bit for bit (BLAS gemv does not promise that)."""
    return np.einsum("ij,j->i", W, h)


def _check_ids(context: Sequence[int], V: int) -> None:
    if len(context) and (min(context) < 0 or max(context) >= V):
        bad = next(t for t in context if not 0 <= t < V)
        raise IdOutOfRange(f"token id {bad} outside [0, {V})")


def context_key(context: Sequence[int]) -> int:
    """Stable 64-bit key of a context tuple (length is implied by the bytes)."""
    raw = np.asarray(context, dtype="<i8").tobytes()
    return int.from_bytes(hashlib.blake2b(raw, digest_size=8).digest(), "little")


# -- n-gram --------------------------------------------------------------------

class NGramModel:
    """Add-alpha n-gram. Scores with the longest context suffix seen in training."""

    def __init__(self, order: int, alpha: float, V: int, table: dict):
        self.order = order
        self.alpha = alpha
        self.V = V
        # context key -> (token ids, counts, total)
        self.table = table

    def vocab_size(self) -> int:
        return self.V

    def param_count(self) -> int:
        return sum(len(toks) for toks, _, _ in self.table.values())

    def _row(self, context: Sequence[int]):
        hist = list(context[-(self.order - 1):]) if self.order > 1 else []
        for start in range(len(hist) + 1):
            row = self.table.get(context_key(hist[start:]))
            if row is not None:
                return row
        raise AssertionError("unigram row missing")

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        _check_ids(context, self.V)
        toks, counts, total = self._row(context)
        denom = np.log(total + self.alpha * self.V)
        out = np.full(self.V, np.log(self.alpha) - denom)
        out[toks] = np.log(counts + self.alpha) - denom
        return out

    def __eq__(self, other):
        if not isinstance(other, NGramModel):
            return NotImplemented
        if (self.order, self.alpha, self.V) != (other.order, other.alpha, other.V):
            return False
        if self.table.keys() != other.table.keys():
            return False
        return all(
            np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            for a, b in ((self.table[k], other.table[k]) for k in self.table)
        )

    __hash__ = None

    def triples(self) -> np.ndarray:
        rows = []
        for key in sorted(self.table):
            toks, counts, _ = self.table[key]
            block = np.empty(len(toks), dtype=_TRIPLE)
            block["ctx"], block["token"], block["count"] = key, toks, counts
            rows.append(block)
        return np.concatenate(rows) if rows else np.empty(0, dtype=_TRIPLE)

    @classmethod
    def from_triples(cls, order, alpha, V, triples) -> "NGramModel":
        table = {}
        if len(triples):
            bounds = np.flatnonzero(np.diff(triples["ctx"].astype(np.uint64))) + 1
            for block in np.split(triples, bounds):
                toks = block["token"].astype(np.int64)
                counts = block["count"].astype(np.int64)
                table[int(block["ctx"][0])] = (toks, counts, int(counts.sum()))
        return cls(order, alpha, V, table)


def train_ngram(corpus: Iterable[Sequence[int]], order: int, alpha: float, V: int) -> NGramModel:
    """Count every (context, token) pair for context lengths ``0..order-1``.

    Contexts never cross stream boundaries.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    counts = defaultdict(Counter)
    n_tokens = 0
    for stream in corpus:
        stream = list(stream)
        _check_ids(stream, V)
        n_tokens += len(stream)
        for i, tok in enumerate(stream):
            for L in range(min(order - 1, i) + 1):
                counts[tuple(stream[i - L:i])][tok] += 1
    if n_tokens == 0:
        raise EmptyCorpus("no tokens to train on")
    table = {}
    for ctx, ctr in counts.items():
        toks = np.array(sorted(ctr), dtype=np.int64)
        c = np.array([ctr[t] for t in toks], dtype=np.int64)
        table[context_key(ctx)] = (toks, c, int(c.sum()))
    return NGramModel(order, float(alpha), V, table)


# -- linear head -----------------------------------------------------------------

class LinearHeadModel:
    """``logits = W @ h`` with ``h = sum_j mix[j] * E[context[-1-j]]``."""

    def __init__(self, E: np.ndarray, mix: np.ndarray, W: np.ndarray):
        if E.shape[1] != W.shape[1] or mix.shape[1] != E.shape[1]:
            raise ValueError("hidden dimensions disagree")
        self.E = np.ascontiguousarray(E, dtype=np.float64)
        self.mix = np.ascontiguousarray(mix, dtype=np.float64)
        self.W = np.ascontiguousarray(W, dtype=np.float64)

    @property
    def V(self) -> int:
        return self.E.shape[0]

    @property
    def d(self) -> int:
        return self.E.shape[1]

    @property
    def m(self) -> int:
        return self.mix.shape[0]

    def vocab_size(self) -> int:
        return self.V

    def param_count(self) -> int:
        return self.E.size + self.mix.size + self.W.size

    def hidden(self, context: Sequence[int]) -> np.ndarray:
        _check_ids(context, self.V)
        h = np.zeros(self.d)
        for j in range(min(self.m, len(context))):
            h += self.mix[j] * self.E[context[-1 - j]]
        return h

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        return head_logits(self.W, self.hidden(context))

    def __eq__(self, other):
        if not isinstance(other, LinearHeadModel):
            return NotImplemented
        return (np.array_equal(self.E, other.E) and np.array_equal(self.mix, other.mix)
                and np.array_equal(self.W, other.W))

    __hash__ = None

    @classmethod
    def random(cls, V: int, d: int, m: int = 1, seed: int = 0) -> "LinearHeadModel":
        rng = np.random.Generator(np.random.Philox(key=seed))
        E = rng.standard_normal((V, d)) / np.sqrt(d)
        mix = np.ones((m, d)) / np.arange(1, m + 1)[:, None]
        W = rng.standard_normal((V, d)) / np.sqrt(d)
        return cls(E, mix, W)

    @classmethod
    def fit_bigram(cls, corpus: Iterable[Sequence[int]], V: int, d: int, m: int = 1,
                   seed: int = 0, alpha: float = 1.0, ridge: float = 1e-9) -> "LinearHeadModel":
        """Fit from bigram statistics in one pass over the corpus.

        ``E`` is the rank-``d`` spectral embedding (``U * sqrt(S)``) of the
        sparse matrix ``log(1 + count(a, b) / alpha)``. The head ``W`` then
        solves the least-squares problem of mapping ``E[a]`` onto row ``a`` of
        that matrix, each row weighted by how often ``a`` precedes a token.
        The SVD start vector comes from ``seed``.
        """
        if d >= V:
            raise ValueError("hidden dim must be smaller than V")
        prev, nxt = [], []
        for stream in corpus:
            ids = np.asarray(stream, dtype=np.int64)
            if ids.size and (ids.min() < 0 or ids.max() >= V):
                raise IdOutOfRange(f"token id outside [0, {V})")
            prev.append(ids[:-1])
            nxt.append(ids[1:])
        prev = np.concatenate(prev) if prev else np.empty(0, dtype=np.int64)
        nxt = np.concatenate(nxt) if nxt else np.empty(0, dtype=np.int64)
        if prev.size == 0:
            raise EmptyCorpus("no bigrams to fit")
        C = sp.csr_matrix((np.ones(prev.size), (prev, nxt)), shape=(V, V))
        C.sum_duplicates()
        weight = np.asarray(C.sum(axis=1)).ravel()
        S = C.copy()
        S.data = np.log1p(S.data / alpha)

        rng = np.random.Generator(np.random.Philox(key=seed))
        if V <= 4 * d:
            U, sv, _ = np.linalg.svd(S.toarray())
            U, sv = U[:, :d], sv[:d]
        else:
            U, sv, _ = svds(S, k=d, v0=rng.standard_normal(V))
            order = np.argsort(-sv, kind="stable")
            U, sv = U[:, order], sv[order]
        E = U * np.sqrt(sv)

        gram = E.T @ (E * weight[:, None])
        gram += ridge * max(np.trace(gram), 1.0) * np.eye(d)
        cross = S.T @ (E * weight[:, None])
        W = np.linalg.solve(gram, cross.T).T
        mix = np.ones((m, d)) / np.arange(1, m + 1)[:, None]
        return cls(E, mix, W)


class TrimmedHeadModel:
    """A model whose output layer keeps only the rows in ``mapping.to_target``.

    Context ids stay in the full (target) id space; only the outputs shrink.
    """

    def __init__(self, base, mapping: VocabMapping):
        self.base = base
        self.mapping = mapping
        self.W = base.W[mapping.to_target] if isinstance(base, LinearHeadModel) else None

    @property
    def K(self) -> int:
        return self.mapping.K

    def vocab_size(self) -> int:
        return self.base.vocab_size()

    def trimmed_next_logits(self, context: Sequence[int]) -> np.ndarray:
        if self.W is not None:
            return head_logits(self.W, self.base.hidden(context))
        return self.base.next_logits(context)[self.mapping.to_target]

    def param_count(self) -> int:
        base = self.base
        if isinstance(base, LinearHeadModel):
            return base.param_count() - base.d * (base.V - self.K)
        if isinstance(base, NGramModel):
            kept = np.zeros(base.V, dtype=bool)
            kept[self.mapping.to_target] = True
            return sum(int(kept[toks].sum()) for toks, _, _ in base.table.values())
        return base.param_count()

    def head_params(self) -> int:
        return self.W.size if self.W is not None else 0


def trim_head(model, selection: TrimSelection) -> TrimmedHeadModel:
    return TrimmedHeadModel(model, build_mapping(selection, model.vocab_size()))


def head_params(model) -> int:
    """Number of LM-head parameters (0 for models without an explicit head)."""
    if isinstance(model, TrimmedHeadModel):
        return model.head_params()
    if isinstance(model, LinearHeadModel):
        return model.W.size
    return 0


# -- model files -----------------------------------------------------------------

def save_model(path, model) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        if isinstance(model, LinearHeadModel):
            fh.write(struct.pack("<BIII", _TAG_LINEAR, model.V, model.d, model.m))
            for a in (model.E, model.mix, model.W):
                fh.write(a.astype("<f8").tobytes(order="C"))
        elif isinstance(model, NGramModel):
            triples = model.triples()
            fh.write(struct.pack("<BIIdQ", _TAG_NGRAM, model.order, model.V, model.alpha, len(triples)))
            fh.write(triples.tobytes())
        else:
            raise TypeError(f"cannot save {type(model).__name__}")


def load_model(path):
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise FormatError(f"{path}: not a VTLM1 model file")
    tag = raw[5]
    try:
        if tag == _TAG_LINEAR:
            _, V, d, m = struct.unpack_from("<BIII", raw, 5)
            arr = np.frombuffer(raw, dtype="<f8", offset=5 + 13)
            E = arr[: V * d].reshape(V, d)
            mix = arr[V * d: V * d + m * d].reshape(m, d)
            W = arr[V * d + m * d:].reshape(V, d)
            return LinearHeadModel(E.astype(np.float64), mix.astype(np.float64), W.astype(np.float64))
        if tag == _TAG_NGRAM:
            _, order, V, alpha, n = struct.unpack_from("<BIIdQ", raw, 5)
            triples = np.frombuffer(raw, dtype=_TRIPLE, count=n, offset=5 + struct.calcsize("<BIIdQ"))
            return NGramModel.from_triples(order, alpha, V, triples)
    except ValueError as exc:
        raise FormatError(f"{path}: truncated model file ({exc})") from None
    raise FormatError(f"{path}: unknown model type tag {tag}")
