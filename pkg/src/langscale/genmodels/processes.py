"""Simon and Pitman-Yor word-introduction processes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..textio import TokenStream


@dataclass(frozen=True)
class SimonParams:
    a: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError(f"Simon innovation rate must lie in (0, 1), got {self.a}")


@dataclass(frozen=True)
class PitmanYorParams:
    a: float
    b: float
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.a < 1:
            raise ValueError(f"Pitman-Yor discount must lie in [0, 1), got {self.a}")
        if self.b < 0:
            raise ValueError(f"Pitman-Yor strength must be >= 0, got {self.b}")


def simon_ids(a, length, rng):
    """Raw Simon-process id sequence.

    Position 0 holds word 0. Every later position introduces a new word with
    probability ``a``; otherwise it copies a uniformly chosen earlier position.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    t = np.arange(length)
    is_new = rng.random(length) < a
    is_new[0] = True
    # position copied from, uniform over 0..t-1
    source = np.floor(rng.random(length) * t).astype(np.int64)
    root = np.where(is_new, t, source)
    # follow copy chains to the introducing position (pointer doubling)
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    new_id = np.cumsum(is_new) - 1
    return new_id[root]


def simon_generate(params, length):
    rng = np.random.default_rng(params.seed)
    return TokenStream.from_ids(simon_ids(params.a, length, rng))


def pitman_yor_branch_probs(counts, a, b):
    """Probabilities of each existing type and of a new type after ``sum(counts)`` tokens."""
    counts = np.asarray(counts, dtype=float)
    t = counts.sum()
    K = counts.size
    return (counts - a) / (t + b), (a * K + b) / (t + b)


class _Uniforms:
    """Buffered U[0,1) draws; keeps per-step Python loops cheap."""

    def __init__(self, rng, block=1 << 16):
        self.rng = rng
        self.block = block
        self.buf = rng.random(block).tolist()
        self.pos = 0

    def __call__(self):
        if self.pos == len(self.buf):
            self.buf = self.rng.random(self.block).tolist()
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


def pitman_yor_ids(a, b, length, rng, trace=None):
    """Pitman-Yor sequence via the urn scheme.

    After ``t`` tokens with ``K`` types, a new type appears with probability
    ``(aK + b)/(t + b)``; otherwise type ``k`` is drawn with weight
    ``n_k - a``. The latter draw copies a uniform earlier position and
    accepts it with probability ``1 - a/n_k``.

    When ``trace`` is a list, ``(t, K, p_new, p_existing)`` is appended per step.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    uniform = _Uniforms(rng)
    seq = [0]
    counts = [1]
    for t in range(1, length):
        K = len(counts)
        denom = t + b
        p_new = (a * K + b) / denom if denom > 0 else 1.0
        if trace is not None:
            trace.append((t, K, p_new, (t - a * K) / denom if denom > 0 else 0.0))
        if uniform() < p_new:
            seq.append(K)
            counts.append(1)
            continue
        while True:
            k = seq[int(uniform() * t)]
            if a == 0.0 or uniform() * counts[k] >= a:
                break
        seq.append(k)
        counts[k] += 1
    return np.asarray(seq, dtype=np.int64)


def pitman_yor_generate(params, length, trace=None):
    rng = np.random.default_rng(params.seed)
    return TokenStream.from_ids(pitman_yor_ids(params.a, params.b, length, rng, trace))
