"""Corpus ingestion: tokenization, vocabularies, preprocessing, shuffling.

Token streams are stored as integer id arrays over a :class:`Vocabulary`.
Everything here is immutable once built, so streams can be shared freely.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DecodeError, InsufficientDataError

UNK = "<unk>"
NUM = "N"
RESERVED = (UNK, NUM)

NUMBER_RE = re.compile(r"[0-9][0-9.,]*|[.,][0-9][0-9.,]*")


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Vocabulary:
    id_to_surface: tuple
    frequency: np.ndarray
    surface_to_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "id_to_surface", tuple(self.id_to_surface))
        object.__setattr__(self, "frequency", _frozen(np.asarray(self.frequency, dtype=np.int64)))
        object.__setattr__(
            self, "surface_to_id", {s: i for i, s in enumerate(self.id_to_surface)}
        )
        if len(self.surface_to_id) != len(self.id_to_surface):
            raise ValueError("duplicate surface in vocabulary")
        if len(self.frequency) != len(self.id_to_surface):
            raise ValueError("frequency table does not match vocabulary size")

    def __len__(self):
        return len(self.id_to_surface)

    def __contains__(self, surface):
        return surface in self.surface_to_id

    def id(self, surface):
        return self.surface_to_id[surface]


@dataclass(frozen=True)
class TokenStream:
    tokens: np.ndarray
    vocab: Vocabulary

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.int64)
        if tokens.ndim != 1:
            raise ValueError("token array must be one-dimensional")
        if tokens.size and (tokens.min() < 0 or tokens.max() >= len(self.vocab)):
            raise ValueError("token id outside vocabulary")
        object.__setattr__(self, "tokens", _frozen(tokens))

    def __len__(self):
        return int(self.tokens.size)

    @property
    def surfaces(self):
        table = self.vocab.id_to_surface
        return [table[i] for i in self.tokens.tolist()]

    def render(self):
        """Single-space separated surfaces with one trailing newline."""
        return " ".join(self.surfaces) + "\n"

    @classmethod
    def from_surfaces(cls, surfaces):
        ids = {}
        seq = [ids.setdefault(s, len(ids)) for s in surfaces]
        tokens = np.asarray(seq, dtype=np.int64)
        freq = np.bincount(tokens, minlength=len(ids)) if len(ids) else np.zeros(0, np.int64)
        return cls(tokens, Vocabulary(tuple(ids), freq))

    @classmethod
    def from_ids(cls, ids):
        """Stream whose surfaces are the decimal strings of integer ids.

        Ids are relabeled by first appearance, so the vocabulary stays dense.
        """
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return cls(ids, Vocabulary((), np.zeros(0, np.int64)))
        uniq, first, inverse = np.unique(ids, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        tokens = rank[inverse]
        surfaces = tuple(str(int(u)) for u in uniq[order])
        return cls(tokens, Vocabulary(surfaces, np.bincount(tokens, minlength=len(surfaces))))


@dataclass(frozen=True)
class CharStream:
    chars: np.ndarray
    alphabet: np.ndarray

    def __len__(self):
        return int(self.chars.size)

    @property
    def text(self):
        return self.chars.astype("<u4").tobytes().decode("utf-32-le")


def tokenize(raw_text, encoding="utf-8"):
    """Split ``raw_text`` (bytes or str) on whitespace into a :class:`TokenStream`."""
    if isinstance(raw_text, (bytes, bytearray, memoryview)):
        try:
            raw_text = bytes(raw_text).decode(encoding)
        except UnicodeDecodeError as exc:
            raise DecodeError(exc.start, exc.reason) from None
    return TokenStream.from_surfaces(raw_text.split())


def read_tokens(path):
    return tokenize(Path(path).read_bytes())


def write_tokens(stream, path):
    Path(path).write_text(stream.render(), encoding="utf-8")


def is_number(surface):
    return NUMBER_RE.fullmatch(surface) is not None


def _relabel(surface_of_old, old_tokens):
    """Build a stream from an old-id -> new-surface table, ids in first-seen order."""
    new_surfaces = {}
    key_of_old = np.asarray(
        [new_surfaces.setdefault(s, len(new_surfaces)) for s in surface_of_old],
        dtype=np.int64,
    )
    keys = key_of_old[old_tokens] if old_tokens.size else old_tokens
    names = list(new_surfaces)
    if keys.size == 0:
        return TokenStream(keys, Vocabulary((), np.zeros(0, np.int64)))
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    tokens = rank[inverse]
    surfaces = tuple(names[k] for k in uniq[order])
    return TokenStream(tokens, Vocabulary(surfaces, np.bincount(tokens, minlength=len(surfaces))))


def preprocess(stream, min_freq=1, replace_numbers=False):
    """Collapse rare words to ``<unk>`` and, optionally, numbers to ``N``.

    Numbers are recognised before the rarity rule, and the reserved surfaces
    are never themselves collapsed, which keeps the operation idempotent.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts = np.bincount(stream.tokens, minlength=len(stream.vocab))
    mapped = []
    for surface, count in zip(stream.vocab.id_to_surface, counts.tolist()):
        if surface in RESERVED:
            mapped.append(surface)
        elif replace_numbers and is_number(surface):
            mapped.append(NUM)
        elif count < min_freq:
            mapped.append(UNK)
        else:
            mapped.append(surface)
    return _relabel(mapped, stream.tokens)


def shuffle_ngram(stream, n, seed):
    """Cut the stream into consecutive ``n``-token chunks and permute them.

    A trailing partial chunk takes part in the permutation as a chunk of its
    own. Uses ``numpy.random.default_rng(seed)``.
    """
    if n < 1:
        raise ValueError("chunk size must be >= 1")
    N = len(stream)
    if N == 0:
        raise InsufficientDataError("cannot shuffle an empty stream")
    n_chunks = -(-N // n)
    lengths = np.full(n_chunks, n, dtype=np.int64)
    lengths[-1] = N - n * (n_chunks - 1)
    perm = np.random.default_rng(seed).permutation(n_chunks)
    lens = lengths[perm]
    out_starts = np.concatenate(([0], np.cumsum(lens)[:-1]))
    index = np.repeat(perm * n, lens) + (np.arange(N) - np.repeat(out_starts, lens))
    return TokenStream(stream.tokens[index], stream.vocab)


def holdout_split(corpus, test_fraction):
    """Head/tail split whose tail only uses words known to the head.

    When the tail has words the head lacks, those become ``<unk>``, and
    head words seen once become ``<unk>`` too so the models learn its mass.
    """
    cut = int(round(len(corpus) * (1 - test_fraction)))
    head, tail = corpus.tokens[:cut], corpus.tokens[cut:]
    V = len(corpus.vocab)
    head_counts = np.bincount(head, minlength=V)
    if tail.size == 0 or head_counts[tail].min() > 0:
        return TokenStream(head, corpus.vocab), TokenStream(tail, corpus.vocab), 0
    surfaces = list(corpus.vocab.id_to_surface)
    mapped = [UNK if c <= 1 else s for s, c in zip(surfaces, head_counts.tolist())]
    n_oov = int(np.count_nonzero(head_counts[tail] == 0))
    remapped = _relabel(mapped, corpus.tokens)
    return (
        TokenStream(remapped.tokens[:cut], remapped.vocab),
        TokenStream(remapped.tokens[cut:], remapped.vocab),
        n_oov,
    )


def to_char_stream(stream, separator=" "):
    if len(stream) == 0:
        raise InsufficientDataError("cannot build characters from an empty stream")
    text = separator.join(stream.surfaces)
    chars = np.frombuffer(text.encode("utf-32-le"), dtype="<u4").astype(np.int64)
    return CharStream(_frozen(chars), _frozen(np.unique(chars)))
