"""Smoothed n-gram language models over continuous token streams.

Counts live in per-order node tables. A node at level ``k`` is an observed
k-gram ``(prefix, w)`` whose ``prefix`` is a level ``k-1`` node; node ids are
sorted by ``prefix * V + w`` so the continuations of one context are
contiguous. Level 0 holds the single empty context.

Every scheme except plain MLE is evaluated through one recursion. For a
context node ``p`` whose continuation total ``T[p]`` is positive,

    P_k(w | p) = node_prob[g]               if (p, w) is node g
               = bow[p] * P_{k-1}(w | p')   otherwise

where ``p'`` drops the oldest token of ``p``. A context with no observed
continuation defers to the next lower order. Below the unigram level the
recursion bottoms out in the uniform distribution for Kneser-Ney and in
zero for the other schemes, whose unigram already covers the vocabulary.
"""

from __future__ import annotations

import bisect
import io
import itertools
import json
import math
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, InsufficientDataError, VocabularyError
from ..textio import UNK, TokenStream, Vocabulary
from .processes import _Uniforms

SMOOTHINGS = ("mle", "interp", "katz", "kn")
FORMAT_VERSION = 1
_MAX_REJECTIONS = 1000


def kn_discount(n1, n2):
    """Absolute discount ``n1 / (n1 + 2 n2)`` from count-of-counts."""
    if n1 + 2 * n2 == 0:
        return 0.5
    return n1 / (n1 + 2 * n2)


def good_turing_discounts(count_of_counts, k=5):
    """Katz discount ratios ``d_r`` for ``1 <= r <= k``.

    ``count_of_counts[r]`` is the number of n-grams seen exactly ``r`` times.
    With ``r* = (r + 1) N_{r+1} / N_r`` and ``m = (k + 1) N_{k+1} / N_1``,
    ``d_r = (r*/r - m) / (1 - m)``. Returns None when any ratio falls
    outside ``(0, 1]``.
    """

    def N(r):
        return count_of_counts[r] if r < len(count_of_counts) else 0

    if N(1) == 0:
        return None
    m = (k + 1) * N(k + 1) / N(1)
    if m >= 1:
        return None
    out = {}
    for r in range(1, k + 1):
        if N(r) == 0:
            return None
        r_star = (r + 1) * N(r + 1) / N(r)
        d = (r_star / r - m) / (1 - m)
        if not 0 < d <= 1:
            return None
        out[r] = d
    return out


def simplex_grid(n, step=0.05):
    """All weight vectors of length ``n`` with entries in multiples of ``step`` summing to 1."""
    units = int(round(1 / step))
    rows = []
    for cuts in itertools.combinations(range(units + n - 1), n - 1):
        bounds = (-1,) + cuts + (units + n - 1,)
        rows.append([bounds[i + 1] - bounds[i] - 1 for i in range(n)])
    return np.asarray(rows, dtype=np.float64) / units


@dataclass
class PerplexityResult:
    value: float
    n_tokens: int
    oov_handling: str
    n_oov: int = 0
    n_zero: int = 0
    n_fallback: int = 0
    log_likelihood: float = 0.0

    @property
    def infinite(self):
        return math.isinf(self.value)

    def to_dict(self):
        return {
            "perplexity": None if self.infinite else self.value,
            "infinite": self.infinite,
            "n_tokens": self.n_tokens,
            "oov_handling": self.oov_handling,
            "n_oov": self.n_oov,
            "n_zero_probability": self.n_zero,
            "n_uniform_fallback": self.n_fallback,
            "log_likelihood": self.log_likelihood,
        }


def count_tables(ids, V, n):
    """Sorted node keys and counts for levels 1..n of an id sequence."""
    keys, counts = [], []
    prev = None
    for k in range(1, n + 1):
        if ids.size < k:
            keys.append(np.zeros(0, dtype=np.int64))
            counts.append(np.zeros(0, dtype=np.int64))
            continue
        key = ids.astype(np.int64) if k == 1 else prev[:-1] * V + ids[k - 1 :]
        uniq, inv, cnt = np.unique(key, return_inverse=True, return_counts=True)
        keys.append(uniq.astype(np.int64))
        counts.append(cnt.astype(np.int64))
        # prev[j] = node id of the k-gram ending at position j + k - 1
        prev = inv.astype(np.int64).ravel()
    return keys, counts


class NGramModel:
    """Immutable n-gram model; see the module docstring for the recursion."""

    def __init__(self, vocab, order, smoothing, keys, counts, params=None):
        if smoothing not in SMOOTHINGS:
            raise ValueError(f"unknown smoothing {smoothing!r}")
        if len(keys) != order or len(counts) != order:
            raise ValueError("need one key/count table per order")
        self.vocab = tuple(vocab)
        self.order = int(order)
        self.smoothing = smoothing
        self.params = dict(params or {})
        self.V = len(self.vocab)
        self.surface_to_id = {s: i for i, s in enumerate(self.vocab)}
        # index 0 is the root level
        self.keys = [np.zeros(1, dtype=np.int64)] + [np.asarray(k, dtype=np.int64) for k in keys]
        self.counts = [np.ones(1, dtype=np.int64)] + [np.asarray(c, dtype=np.int64) for c in counts]
        self._derive()
        self._gen = None

    # -- construction of derived tables ---------------------------------------

    def _derive(self):
        n, V = self.order, self.V
        self.n_nodes = [1] + [k.size for k in self.keys[1:]]
        self.prefix = [None] + [k // V for k in self.keys[1:]]
        self.token = [None] + [k % V for k in self.keys[1:]]
        self.suffix = [None]
        for k in range(1, n + 1):
            if k == 1:
                self.suffix.append(np.zeros(self.n_nodes[1], dtype=np.int64))
            else:
                s = self._lookup(k - 1, self.suffix[k - 1][self.prefix[k]], self.token[k])
                if np.any(s < 0):
                    raise FormatError("count tables are not suffix-closed")
                self.suffix.append(s)
        self.offsets = [None] + [
            np.searchsorted(self.prefix[k], np.arange(self.n_nodes[k - 1] + 1)) for k in range(1, n + 1)
        ]

        if self.smoothing == "kn":
            eff = [None]
            for k in range(1, n + 1):
                if k == n:
                    eff.append(self.counts[k])
                else:
                    eff.append(np.bincount(self.suffix[k + 1], minlength=self.n_nodes[k]).astype(np.int64))
        else:
            eff = list(self.counts)
        self.eff = eff
        self.total = [None] + [self._group_sum(k, eff[k]) for k in range(1, n + 1)]

        base = 1.0 / V if self.smoothing == "kn" else 0.0
        self.base = base
        self.node_prob = [None]
        self.bow = [None]
        self.take = [None]
        self.weight = [None]
        params = self.params
        if self.smoothing == "kn":
            params["discounts"] = []
        if self.smoothing == "katz":
            params["katz_effective_k"] = []
        lam = np.asarray(params.get("weights", [1.0] * n), dtype=np.float64) if self.smoothing == "interp" else None

        for k in range(1, n + 1):
            c = eff[k].astype(np.float64)
            p = self.prefix[k]
            T = self.total[k].astype(np.float64)
            Tp = T[p]
            live = Tp > 0
            safeT = np.where(Tp > 0, Tp, 1.0)
            lower = np.full(self.n_nodes[k], base) if k == 1 else self.node_prob[k - 1][self.suffix[k]]
            bow = np.zeros(self.n_nodes[k - 1])
            safe_ctx = np.where(T > 0, T, 1.0)

            if self.smoothing == "mle":
                prob = c / safeT
                weight = c
                take = np.ones(self.n_nodes[k - 1])
            elif self.smoothing == "interp":
                cum = lam[:k].sum()
                mu = 1.0 if cum == 0 else lam[k - 1] / cum
                if k == 1:
                    mu = 1.0
                prob = mu * c / safeT + (1 - mu) * lower
                bow[:] = 1 - mu
                weight = c
                take = np.full(self.n_nodes[k - 1], mu)
            elif self.smoothing == "kn":
                cc = np.bincount(eff[k], minlength=3)
                D = kn_discount(int(cc[1]), int(cc[2]))
                params["discounts"].append(D)
                npos = self._group_sum(k, (eff[k] > 0).astype(np.int64)).astype(np.float64)
                bow = D * npos / safe_ctx
                weight = np.maximum(c - D, 0.0)
                prob = weight / safeT + bow[p] * lower
                take = 1.0 - bow
            else:  # katz
                d = np.ones(self.n_nodes[k])
                K = params.get("katz_k", 5)
                disc = None
                if k >= 2:
                    cc = np.bincount(self.counts[k])
                    for kk in range(K, 1, -1):
                        disc = good_turing_discounts(cc, kk)
                        if disc is not None:
                            params["katz_effective_k"].append(kk)
                            break
                    else:
                        params["katz_effective_k"].append(0)
                    if disc:
                        table = np.ones(max(disc) + 2)
                        for r, v in disc.items():
                            table[r] = v
                        small = self.counts[k] < table.size
                        d[small] = table[self.counts[k][small]]
                if k == 1:
                    seen_lower = np.zeros(self.n_nodes[0])
                else:
                    seen_lower = self._group_sum(k, lower)
                room = 1.0 - seen_lower
                degenerate = room <= 1e-12
                # contexts whose continuations all exceed the threshold keep no
                # mass for unseen words; reserve npos / (T + npos) for them
                undiscounted = self._group_sum(k, (d < 1).astype(np.int64)) == 0
                npos = self._group_sum(k, np.ones(self.n_nodes[k], dtype=np.int64))
                escape = undiscounted & ~degenerate & (T > 0) & (k >= 2)
                shrink = np.where(escape, T / np.where(T + npos > 0, T + npos, 1), 1.0)
                weight = d * c * shrink[p]
                seen = self._group_sum(k, weight) / safe_ctx
                alpha = np.where(degenerate, 0.0, (1.0 - seen) / np.where(degenerate, 1.0, room))
                # nowhere to put the held-back mass: renormalise the seen part
                scale = np.where(degenerate & (seen > 0), 1.0 / np.where(seen > 0, seen, 1.0), 1.0)
                prob = weight / safeT * scale[p]
                bow = alpha
                take = np.where(degenerate, 1.0, seen)
            prob = np.where(live, prob, lower)
            self.node_prob.append(prob)
            self.bow.append(bow)
            self.take.append(take)
            self.weight.append(weight)

    def _group_sum(self, k, values):
        """Sum ``values`` (one per level-k node) over each level k-1 context."""
        off = self.offsets[k]
        cs = np.concatenate(([0], np.cumsum(values)))
        return cs[off[1:]] - cs[off[:-1]]

    def _lookup(self, k, p, w):
        """Level-k node for context node(s) ``p`` and token(s) ``w``; -1 where absent."""
        p = np.asarray(p, dtype=np.int64)
        w = np.asarray(w, dtype=np.int64)
        key = p * self.V + w
        keys = self.keys[k]
        pos = np.searchsorted(keys, key)
        pos_c = np.minimum(pos, max(keys.size - 1, 0))
        ok = (p >= 0) & (w >= 0) & (pos < keys.size)
        if keys.size:
            ok &= keys[pos_c] == key
        return np.where(ok, pos_c, -1)

    # -- vocabulary ----------------------------------------------------------------

    def encode(self, stream):
        """Map a stream onto model ids; returns ``(ids, n_oov)``."""
        table = np.full(len(stream.vocab), -1, dtype=np.int64)
        for i, s in enumerate(stream.vocab.id_to_surface):
            table[i] = self.surface_to_id.get(s, -1)
        ids = table[stream.tokens] if len(stream) else np.zeros(0, dtype=np.int64)
        missing = ids < 0
        n_oov = int(np.count_nonzero(missing))
        if n_oov:
            if UNK not in self.surface_to_id:
                first = stream.vocab.id_to_surface[int(stream.tokens[np.flatnonzero(missing)[0]])]
                raise VocabularyError(f"token {first!r} is not in the model vocabulary and no <unk> exists")
            ids = np.where(missing, self.surface_to_id[UNK], ids)
        return ids, n_oov

    def to_stream(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        freq = np.bincount(ids, minlength=self.V)
        return TokenStream(ids, Vocabulary(self.vocab, freq))

    # -- queries -----------------------------------------------------------------

    def context_nodes(self, context):
        """Node id (or -1) of the last ``j`` context tokens, j = 0..len(context)."""
        context = [int(c) for c in context][-(self.order - 1) :] if self.order > 1 else []
        nodes = [0]
        m = len(context)
        for j in range(1, m + 1):
            node = 0
            for k, w in enumerate(context[m - j :], 1):
                node = int(self._lookup(k, node, w)) if node >= 0 else -1
            nodes.append(node)
        return nodes

    def context_seen(self, context):
        nodes = self.context_nodes(context)
        p = nodes[-1]
        return p >= 0 and self.total[len(nodes)][p] > 0

    def prob(self, context, token):
        """q(token | context); context may be shorter than ``order - 1``."""
        nodes = self.context_nodes(context)
        w = int(token)
        if self.smoothing == "mle":
            k = len(nodes)
            p = nodes[-1]
            if p < 0 or self.total[k][p] == 0:
                return 1.0 / self.V
            g = int(self._lookup(k, p, w))
            return 0.0 if g < 0 else float(self.eff[k][g] / self.total[k][p])
        prob = self.base
        for k in range(1, len(nodes) + 1):
            p = nodes[k - 1]
            if p < 0 or self.total[k][p] == 0:
                continue
            g = int(self._lookup(k, p, w))
            prob = float(self.node_prob[k][g]) if g >= 0 else float(self.bow[k][p]) * prob
        return prob

    def distribution(self, context):
        """Full next-token distribution as a length-V array."""
        nodes = self.context_nodes(context)
        if self.smoothing == "mle":
            k = len(nodes)
            p = nodes[-1]
            if p < 0 or self.total[k][p] == 0:
                return np.full(self.V, 1.0 / self.V)
            dist = np.zeros(self.V)
            a, b = self.offsets[k][p], self.offsets[k][p + 1]
            dist[self.token[k][a:b]] = self.eff[k][a:b] / self.total[k][p]
            return dist
        dist = np.full(self.V, self.base)
        for k in range(1, len(nodes) + 1):
            p = nodes[k - 1]
            if p < 0 or self.total[k][p] == 0:
                continue
            a, b = self.offsets[k][p], self.offsets[k][p + 1]
            dist = dist * self.bow[k][p]
            dist[self.token[k][a:b]] = self.node_prob[k][a:b]
        return dist

    def stream_nodes(self, ids):
        """``h[j][i]``: level-j node of tokens ``i-j+1..i`` (or -1), j = 0..order-1."""
        ids = np.asarray(ids, dtype=np.int64)
        h = [np.zeros(ids.size, dtype=np.int64)]
        for j in range(1, self.order):
            cur = np.full(ids.size, -1, dtype=np.int64)
            if j == 1:
                cur = self._lookup(1, np.zeros(ids.size, dtype=np.int64), ids)
            elif ids.size >= j:
                cur[j - 1 :] = self._lookup(j, h[j - 1][j - 2 : -1], ids[j - 1 :])
            h.append(cur)
        return h

    def stream_probs(self, ids):
        """q(x_i | preceding tokens) for every position; returns ``(probs, n_fallback)``.

        The first ``order - 1`` positions use the longest context available.
        Ids of -1 denote tokens unknown to the model.
        """
        ids = np.asarray(ids, dtype=np.int64)
        N = ids.size
        h = self.stream_nodes(ids)
        pos = np.arange(N)
        avail = np.minimum(pos, self.order - 1) + 1  # highest order usable at i

        def ctx(k):
            if k == 1:
                return np.zeros(N, dtype=np.int64)
            c = np.full(N, -1, dtype=np.int64)
            c[1:] = h[k - 1][:-1]
            return np.where(avail >= k, c, -1)

        if self.smoothing == "mle":
            probs = np.zeros(N)
            fallback = np.zeros(N, dtype=bool)
            for k in range(1, self.order + 1):
                at = avail == k
                if not at.any():
                    continue
                p = ctx(k)[at]
                T = np.where(p >= 0, self.total[k][np.maximum(p, 0)], 0)
                g = self._lookup(k, p, ids[at])
                c = np.where(g >= 0, self.eff[k][np.maximum(g, 0)], 0)
                q = np.where(T > 0, c / np.where(T > 0, T, 1), 1.0 / self.V)
                probs[at] = q
                fallback[at] = T == 0
            return probs, int(fallback.sum())

        probs = np.full(N, self.base)
        for k in range(1, self.order + 1):
            p = ctx(k)
            T = np.where(p >= 0, self.total[k][np.maximum(p, 0)], 0)
            live = T > 0
            g = self._lookup(k, p, ids)
            hit = live & (g >= 0)
            miss = live & (g < 0)
            probs[hit] = self.node_prob[k][g[hit]]
            probs[miss] = self.bow[k][p[miss]] * probs[miss]
        return probs, 0

    def perplexity(self, stream):
        ids, n_oov = self.encode(stream)
        return self.perplexity_ids(ids, n_oov)

    def perplexity_ids(self, ids, n_oov=0):
        N = len(ids)
        if N < 1:
            raise InsufficientDataError("cannot score an empty stream")
        probs, n_fallback = self.stream_probs(ids)
        n_zero = int(np.count_nonzero(probs <= 0))
        policy = "unk" if UNK in self.surface_to_id else "closed"
        if n_zero:
            return PerplexityResult(math.inf, N, policy, n_oov, n_zero, n_fallback, -math.inf)
        ll = float(np.sum(np.log(probs)))
        return PerplexityResult(math.exp(-ll / N), N, policy, n_oov, 0, n_fallback, ll)

    # -- generation ----------------------------------------------------------------

    def _generation_tables(self):
        if self._gen is None:
            n = self.order
            self._gen = {
                "keys": [None] + [self.keys[k].tolist() for k in range(1, n + 1)],
                "cw": [None] + [np.concatenate(([0.0], np.cumsum(self.weight[k]))).tolist() for k in range(1, n + 1)],
                "off": [None] + [self.offsets[k].tolist() for k in range(1, n + 1)],
                "tok": [None] + [self.token[k].tolist() for k in range(1, n + 1)],
                "total": [None] + [self.total[k].tolist() for k in range(1, n + 1)],
                "take": [None] + [np.asarray(self.take[k]).tolist() for k in range(1, n + 1)],
            }
        return self._gen

    def generate_ids(self, length, seed):
        """Autoregressive sample of ``length`` model ids, deterministic in ``seed``."""
        rng = np.random.default_rng(seed)
        uniform = _Uniforms(rng)
        G = self._generation_tables()
        keys, cw, off, tok, total, take = (G[x] for x in ("keys", "cw", "off", "tok", "total", "take"))
        V, n = self.V, self.order
        katz = self.smoothing == "katz"

        def child(k, p, w):
            key = p * V + w
            lst = keys[k]
            i = bisect.bisect_left(lst, key)
            return i if i < len(lst) and lst[i] == key else -1

        def draw(k, nodes):
            if k == 0:
                return min(int(uniform() * V), V - 1)
            p = nodes[k - 1]
            if p < 0 or total[k][p] == 0:
                return draw(k - 1, nodes)
            if uniform() < take[k][p]:
                a, b = off[k][p], off[k][p + 1]
                c = cw[k]
                target = c[a] + uniform() * (c[b] - c[a])
                g = bisect.bisect_right(c, target, a, b + 1) - 1
                return tok[k][min(max(g, a), b - 1)]
            if katz:
                for _ in range(_MAX_REJECTIONS):
                    w = draw(k - 1, nodes)
                    if child(k, p, w) < 0:
                        return w
                return self._exact_draw(nodes[:k], uniform)
            return draw(k - 1, nodes)

        out = []
        nodes = [0]
        for _ in range(length):
            w = draw(len(nodes), nodes)
            out.append(w)
            new = [0]
            for j in range(1, min(len(nodes) + 1, n)):
                prev = nodes[j - 1]
                new.append(child(j, prev, w) if prev >= 0 else -1)
            nodes = new
        return np.asarray(out, dtype=np.int64)

    def _exact_draw(self, nodes, uniform):
        # rejection sampling gave up; sample the exact conditional instead
        k = len(nodes)
        p = nodes[-1]
        lower = self.distribution_from_nodes(nodes[:-1])
        a, b = self.offsets[k][p], self.offsets[k][p + 1]
        lower[self.token[k][a:b]] = 0.0
        cdf = np.cumsum(lower)
        return int(min(np.searchsorted(cdf, uniform() * cdf[-1], side="right"), self.V - 1))

    def distribution_from_nodes(self, nodes):
        dist = np.full(self.V, self.base)
        for k in range(1, len(nodes) + 1):
            p = nodes[k - 1]
            if p < 0 or self.total[k][p] == 0:
                continue
            a, b = self.offsets[k][p], self.offsets[k][p + 1]
            dist = dist * self.bow[k][p]
            dist[self.token[k][a:b]] = self.node_prob[k][a:b]
        return dist

    def generate(self, length, seed):
        return self.to_stream(self.generate_ids(length, seed))

    # -- serialization -------------------------------------------------------------

    def _train_params(self):
        keep = {"weights", "katz_k", "held_out_fraction"}
        return {k: v for k, v in self.params.items() if k in keep}

    def save(self, path):
        """Write a zip archive: ``meta.json`` plus one ``.npy`` per count table."""
        meta = {
            "format": "langscale-ngram",
            "version": FORMAT_VERSION,
            "order": self.order,
            "smoothing": self.smoothing,
            "params": self._train_params(),
            "vocab": list(self.vocab),
        }
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            _write_entry(zf, "meta.json", json.dumps(meta, sort_keys=True, ensure_ascii=False).encode("utf-8"))
            for k in range(1, self.order + 1):
                _write_entry(zf, f"keys_{k}.npy", _npy_bytes(self.keys[k]))
                _write_entry(zf, f"counts_{k}.npy", _npy_bytes(self.counts[k]))
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path):
        try:
            with zipfile.ZipFile(path) as zf:
                meta = json.loads(zf.read("meta.json").decode("utf-8"))
                if meta.get("format") != "langscale-ngram":
                    raise FormatError(f"{path}: not an n-gram model file")
                if meta.get("version") != FORMAT_VERSION:
                    raise FormatError(f"{path}: unsupported model version {meta.get('version')}")
                n = meta["order"]
                keys = [np.load(io.BytesIO(zf.read(f"keys_{k}.npy"))) for k in range(1, n + 1)]
                counts = [np.load(io.BytesIO(zf.read(f"counts_{k}.npy"))) for k in range(1, n + 1)]
        except (zipfile.BadZipFile, KeyError) as exc:
            raise FormatError(f"{path}: malformed model file ({exc})") from None
        return cls(meta["vocab"], n, meta["smoothing"], keys, counts, meta["params"])


def _npy_bytes(arr):
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr, dtype="<i8"), allow_pickle=False)
    return buf.getvalue()


def _write_entry(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, data)


def _model_ids(stream):
    """Relabel the types present in ``stream`` densely by first occurrence."""
    tokens = stream.tokens
    uniq, first, inv = np.unique(tokens, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    surfaces = [stream.vocab.id_to_surface[int(u)] for u in uniq[order]]
    return rank[inv.ravel()].astype(np.int64), surfaces


def _tune_weights(ids, V, n, held_out_fraction, step=0.05):
    """Grid-search interpolation weights on the tail of ``ids``."""
    cut = int(round(ids.size * (1 - held_out_fraction)))
    head, tail_len = ids[:cut], ids.size - cut
    if cut < n or tail_len < 1:
        raise InsufficientDataError("stream too short to hold out data for weight tuning")
    keys, counts = count_tables(head, V, n)
    # the head may miss some types; they simply have no nodes
    mle = NGramModel([str(i) for i in range(V)], n, "mle", keys, counts)
    present = np.zeros(V, dtype=bool)
    present[np.unique(head)] = True
    h = mle.stream_nodes(np.where(present[ids], ids, -1))
    pos = np.arange(cut, ids.size)
    w = ids[pos]
    usable = present[w]
    pos, w = pos[usable], w[usable]
    M = np.zeros((pos.size, n))
    top = np.ones(pos.size, dtype=np.int64)
    for k in range(1, n + 1):
        p = np.zeros(pos.size, dtype=np.int64) if k == 1 else h[k - 1][pos - 1]
        T = np.where(p >= 0, mle.total[k][np.maximum(p, 0)], 0)
        g = mle._lookup(k, p, w)
        c = np.where(g >= 0, mle.counts[k][np.maximum(g, 0)], 0)
        defined = T > 0
        M[:, k - 1] = np.where(defined, c / np.where(defined, T, 1), 0.0)
        top = np.where(defined, k, top)
    grid = simplex_grid(n, step)
    best, best_ll = None, -math.inf
    chunk = max(1, 4_000_000 // max(pos.size, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, len(grid), chunk):
            G = grid[start : start + chunk]
            cum = np.cumsum(G, axis=1)  # (g, n)
            num = M @ G.T
            den = cum[:, top - 1].T
            q = np.where(den > 0, num / np.where(den > 0, den, 1), 0.0)
            ll = np.log(q).sum(axis=0)
            ll = np.where(np.isnan(ll), -np.inf, ll)
            i = int(np.argmax(ll))
            if ll[i] > best_ll:
                best_ll, best = float(ll[i]), G[i]
    if best is None:
        best = np.full(n, 1.0 / n)
    return [float(x) for x in best]


def ngram_train(stream, n=3, smoothing="kn", held_out_fraction=0.1, weights=None, katz_k=5):
    """Count all k-grams (k <= n) of ``stream`` and fit the smoothing parameters.

    The model vocabulary is the set of types occurring in ``stream``. For
    ``interp``, weights not given explicitly are chosen by grid search on the
    held-out tail, and the final counts come from the whole stream.
    """
    if smoothing not in SMOOTHINGS:
        raise ValueError(f"unknown smoothing {smoothing!r}; choose from {SMOOTHINGS}")
    if n < 1:
        raise ValueError("order must be >= 1")
    if len(stream) < n:
        raise InsufficientDataError(f"{len(stream)} tokens is too short for a {n}-gram model")
    ids, surfaces = _model_ids(stream)
    V = len(surfaces)
    if V < 2:
        raise InsufficientDataError("need at least two distinct tokens")
    params = {}
    if smoothing == "interp":
        if weights is None:
            weights = _tune_weights(ids, V, n, held_out_fraction)
            params["held_out_fraction"] = held_out_fraction
        if len(weights) != n or min(weights) < 0 or not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
            raise ValueError("interpolation weights must be n nonnegative numbers summing to 1")
        params["weights"] = [float(x) for x in weights]
    if smoothing == "katz":
        params["katz_k"] = int(katz_k)
    keys, counts = count_tables(ids, V, n)
    return NGramModel(surfaces, n, smoothing, keys, counts, params)


def ngram_prob(model, context, token):
    return model.prob(context, token)


def ngram_generate(model, length, seed):
    return model.generate(length, seed)


def perplexity(model, stream):
    return model.perplexity(stream)
