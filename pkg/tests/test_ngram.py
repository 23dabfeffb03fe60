import math
from collections import Counter, defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langscale.errors import FormatError, InsufficientDataError, VocabularyError
from langscale.genmodels import (
    NGramModel,
    good_turing_discounts,
    kn_discount,
    ngram_generate,
    ngram_prob,
    ngram_train,
    perplexity,
)
from langscale.genmodels.ngram import simplex_grid
from langscale.textio import TokenStream, tokenize

SCHEMES = ("mle", "interp", "katz", "kn")


def ids_of(model, text):
    return [model.surface_to_id[w] for w in text.split()]


def toy_corpus(n_tokens=3000, V=30, seed=0):
    rng = np.random.default_rng(seed)
    # a sticky Markov chain so that higher orders carry information
    p = 1 / np.arange(1, V + 1) ** 1.1
    p /= p.sum()
    out = [0]
    for _ in range(n_tokens - 1):
        if rng.random() < 0.4:
            out.append((out[-1] * 7 + 3) % V)
        else:
            out.append(int(rng.choice(V, p=p)))
    return TokenStream.from_ids(out)


# -- independent reference implementations --------------------------------------


def ngram_counts(seq, n):
    counts = [None]
    for k in range(1, n + 1):
        counts.append(Counter(tuple(seq[i : i + k]) for i in range(len(seq) - k + 1)))
    return counts


def kn_oracle(seq, n, V):
    """Interpolated Kneser-Ney with one discount per order and a uniform base."""
    counts = ngram_counts(seq, n)
    eff = [None]
    for k in range(1, n + 1):
        if k == n:
            eff.append(dict(counts[k]))
        else:
            cont = Counter(g[1:] for g in counts[k + 1])
            eff.append({g: cont.get(g, 0) for g in counts[k]})
    D = [None]
    for k in range(1, n + 1):
        vals = list(eff[k].values())
        n1, n2 = vals.count(1), vals.count(2)
        D.append(n1 / (n1 + 2 * n2) if n1 + 2 * n2 else 0.5)
    by_ctx = [None] + [defaultdict(dict) for _ in range(n)]
    for k in range(1, n + 1):
        for g, c in eff[k].items():
            by_ctx[k][g[:-1]][g[-1]] = c

    def prob(k, h, w):
        if k == 0:
            return 1.0 / V
        lower = prob(k - 1, h[1:], w)
        children = by_ctx[k].get(h, {})
        T = sum(children.values())
        if T == 0:
            return lower
        npos = sum(1 for c in children.values() if c > 0)
        return max(children.get(w, 0) - D[k], 0) / T + D[k] * npos / T * lower

    def q(context, w):
        h = tuple(context)[-(n - 1) :] if n > 1 else ()
        return prob(len(h) + 1, h, w)

    return q


def gt_oracle(count_of_counts, K):
    N = lambda r: count_of_counts.get(r, 0)
    m = (K + 1) * N(K + 1) / N(1)
    out = {}
    for r in range(1, K + 1):
        r_star = (r + 1) * N(r + 1) / N(r)
        out[r] = (r_star / r - m) / (1 - m)
    return out


def katz_bigram_oracle(seq, V, K=5):
    """Katz bigram over an MLE unigram, with the escape rule for contexts
    whose continuations are all above the discount threshold."""
    uni = Counter(seq)
    total = len(seq)
    big = Counter(zip(seq, seq[1:]))
    coc = Counter(big.values())
    disc = None
    for kk in range(K, 1, -1):
        if coc.get(1, 0) == 0:
            break
        cand = gt_oracle(coc, kk)
        if (kk + 1) * coc.get(kk + 1, 0) / coc[1] < 1 and all(
            coc.get(r, 0) > 0 and 0 < d <= 1 for r, d in cand.items()
        ):
            disc = cand
            break
    disc = disc or {}
    ctx = defaultdict(dict)
    for (h, w), c in big.items():
        ctx[h][w] = c

    def p_uni(w):
        return uni[w] / total

    def q(h, w):
        children = ctx.get(h)
        if not children:
            return p_uni(w)
        T = sum(children.values())
        d = {x: disc.get(c, 1.0) for x, c in children.items()}
        shrink = 1.0
        if all(v == 1.0 for v in d.values()):
            shrink = T / (T + len(children))
        if w in children:
            return d[w] * children[w] * shrink / T
        seen = sum(d[x] * c * shrink for x, c in children.items()) / T
        room = 1.0 - sum(p_uni(x) for x in children)
        return (1.0 - seen) / room * p_uni(w)

    return q


# -- hand examples -----------------------------------------------------------------


def test_mle_bigram_hand_counts():
    m = ngram_train(tokenize("a b a b a"), 2, "mle")
    a, b = ids_of(m, "a b")
    assert ngram_prob(m, [a], b) == 1.0
    assert ngram_prob(m, [b], a) == 1.0
    assert ngram_prob(m, [a], a) == 0.0


def test_unigram_relative_frequency_and_perplexity():
    m = ngram_train(tokenize("a a a b"), 1, "mle")
    a, b = ids_of(m, "a b")
    assert m.prob([], a) == 0.75 and m.prob([], b) == 0.25
    res = perplexity(m, tokenize("a a a b"))
    expected = math.exp(-(3 * math.log(0.75) + math.log(0.25)) / 4)
    assert res.value == pytest.approx(expected, abs=1e-12)
    assert res.n_tokens == 4 and not res.infinite


def test_interpolated_bigram_hand_value():
    m = ngram_train(tokenize("a b a b a"), 2, "interp", weights=[0.5, 0.5])
    a, b = ids_of(m, "a b")
    assert m.prob([a], b) == pytest.approx(0.7, abs=1e-12)


def test_kn_discount_estimator():
    assert kn_discount(2, 1) == 0.5
    assert kn_discount(0, 0) == 0.5
    # toy bigram table with two singletons and one doubleton
    m = ngram_train(tokenize("x y x y z w"), 2, "kn")
    bigram_counts = Counter(m.counts[2].tolist())
    assert (bigram_counts[1], bigram_counts[2]) == (3, 1)
    assert m.params["discounts"][1] == pytest.approx(3 / 5)


def test_good_turing_hand_table():
    coc = [0, 100, 40, 20, 12, 8, 5]
    d = good_turing_discounts(coc, 5)
    m = 6 * 5 / 100
    r_star = {1: 2 * 40 / 100, 2: 3 * 20 / 40, 3: 4 * 12 / 20, 4: 5 * 8 / 12, 5: 6 * 5 / 8}
    for r in range(1, 6):
        assert d[r] == pytest.approx((r_star[r] / r - m) / (1 - m), abs=1e-15)
    assert d == pytest.approx(gt_oracle(dict(enumerate(coc)), 5))
    assert good_turing_discounts([0, 10, 5, 3, 2, 1, 1], 5) is None  # d_5 > 1


def test_kn_matches_oracle():
    stream = toy_corpus()
    for n in (2, 3):
        m = ngram_train(stream, n, "kn")
        seq = stream.tokens.tolist()
        q = kn_oracle(seq, n, m.V)
        rng = np.random.default_rng(n)
        contexts = [seq[i : i + n - 1] for i in rng.integers(0, len(seq) - n, 40)]
        contexts += [rng.integers(0, m.V, n - 1).tolist() for _ in range(20)]
        for ctx in contexts:
            dist = m.distribution(ctx)
            for w in range(m.V):
                assert dist[w] == pytest.approx(q(ctx, w), abs=1e-12)
                if w % 7 == 0:
                    assert m.prob(ctx, w) == pytest.approx(q(ctx, w), abs=1e-12)


def test_kn_continuation_unigram_sums_to_one():
    m = ngram_train(toy_corpus(), 3, "kn")
    assert m.distribution([]).sum() == pytest.approx(1.0, abs=1e-12)


def test_katz_matches_oracle():
    stream = toy_corpus(5000, V=40, seed=2)
    m = ngram_train(stream, 2, "katz")
    seq = stream.tokens.tolist()
    q = katz_bigram_oracle(seq, m.V)
    for h in range(m.V):
        dist = m.distribution([h])
        for w in range(m.V):
            assert dist[w] == pytest.approx(q(h, w), abs=1e-12)


def test_katz_escape_mass():
    # "b" is always followed by "a" (count 3), which is above the threshold
    m = ngram_train(tokenize("b a b a b a c d c d"), 2, "katz", katz_k=1)
    a, b, c = ids_of(m, "a b c")
    dist = m.distribution([b])
    assert dist.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist[c] > 0 and dist[a] == pytest.approx(3 / 4)


def test_interp_matches_direct_mixture():
    stream = toy_corpus(2000, seed=4)
    lam = [0.2, 0.3, 0.5]
    m = ngram_train(stream, 3, "interp", weights=lam)
    seq = stream.tokens.tolist()
    counts = ngram_counts(seq, 3)
    ctx_tot = [None] + [Counter() for _ in range(3)]
    for k in range(1, 4):
        for g, c in counts[k].items():
            ctx_tot[k][g[:-1]] += c
    rng = np.random.default_rng(0)
    for i in rng.integers(0, len(seq) - 3, 30).tolist():
        h = tuple(seq[i : i + 2])
        for w in range(m.V):
            parts = []
            for k in range(1, 4):
                hk = h[len(h) - (k - 1) :] if k > 1 else ()
                T = ctx_tot[k][hk]
                if T == 0:
                    break
                parts.append((lam[k - 1], counts[k][hk + (w,)] / T))
            expected = sum(l * p for l, p in parts) / sum(l for l, _ in parts)
            assert m.prob(list(h), w) == pytest.approx(expected, abs=1e-12)


def test_interp_weights_tuned_on_grid():
    m = ngram_train(toy_corpus(), 3, "interp")
    w = m.params["weights"]
    assert sum(w) == pytest.approx(1.0)
    assert all(abs(x * 20 - round(x * 20)) < 1e-9 for x in w)
    assert m.params["held_out_fraction"] == 0.1


def test_simplex_grid():
    g = simplex_grid(3, 0.05)
    assert g.shape == (231, 3)
    assert np.allclose(g.sum(axis=1), 1.0)


def test_mle_unseen_context_uniform():
    m = ngram_train(tokenize("a b c a b c"), 2, "mle")
    c = m.surface_to_id["c"]
    # every token has a successor except the final "c" position; "c" itself is a seen context
    assert m.distribution([c]).sum() == pytest.approx(1.0)
    m3 = ngram_train(tokenize("a b c a b d"), 3, "mle")
    a, d = ids_of(m3, "a d")
    assert np.allclose(m3.distribution([d, a]), 1 / m3.V)


def test_uniform_model_perplexity_is_V():
    text = " ".join(f"w{i}" for i in range(37))
    m = ngram_train(tokenize(text), 1, "mle")
    assert perplexity(m, tokenize(text)).value == pytest.approx(37, rel=1e-12)


def test_zero_probability_is_flagged():
    m = ngram_train(tokenize("a b a b"), 2, "mle")
    res = perplexity(m, tokenize("a a"))
    assert res.infinite and res.n_zero == 1
    assert res.to_dict()["perplexity"] is None


def test_oov_policy():
    m = ngram_train(tokenize("a b a b"), 2, "kn")
    with pytest.raises(VocabularyError):
        perplexity(m, tokenize("a z"))
    mu = ngram_train(tokenize("a b <unk> a b"), 2, "kn")
    res = perplexity(mu, tokenize("a z b"))
    assert res.n_oov == 1 and res.oov_handling == "unk" and math.isfinite(res.value)


def test_training_errors():
    with pytest.raises(InsufficientDataError):
        ngram_train(tokenize("a b"), 3, "kn")
    with pytest.raises(InsufficientDataError):
        ngram_train(tokenize("a a a"), 2, "kn")
    with pytest.raises(ValueError):
        ngram_train(tokenize("a b a"), 2, "witten-bell")
    with pytest.raises(ValueError):
        ngram_train(tokenize("a b a b"), 2, "interp", weights=[0.3, 0.3])


def test_training_stream_perplexity_beats_uniform():
    stream = toy_corpus()
    for s in ("mle", "interp", "kn"):
        m = ngram_train(stream, 3, s)
        assert perplexity(m, stream).value <= m.V


# -- generation ----------------------------------------------------------------------


def test_forced_sequence():
    m = ngram_train(tokenize("a b c d e f g"), 3, "mle")
    out = ngram_generate(m, 20, seed=3).surfaces
    # once a bigram context exists, every continuation is forced
    for i in range(2, len(out)):
        prev = (out[i - 2], out[i - 1])
        table = {("a", "b"): "c", ("b", "c"): "d", ("c", "d"): "e", ("d", "e"): "f", ("e", "f"): "g"}
        if prev in table:
            assert out[i] == table[prev]


def test_generation_deterministic():
    m = ngram_train(toy_corpus(), 3, "katz")
    a = m.generate_ids(3000, 11)
    assert np.array_equal(a, m.generate_ids(3000, 11))
    assert not np.array_equal(a, m.generate_ids(3000, 12))


def test_unigram_generation_multinomial():
    m = ngram_train(tokenize("a a a a b b b c c d"), 1, "mle")
    N = 200000
    counts = np.bincount(m.generate_ids(N, 0), minlength=m.V)
    p = m.distribution([])
    sd = np.sqrt(N * p * (1 - p))
    assert np.all(np.abs(counts - N * p) <= 3 * sd)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_generated_transitions_follow_model(scheme):
    stream = toy_corpus(4000, V=12, seed=6)
    m = ngram_train(stream, 2, scheme)
    ids = m.generate_ids(300000, 5)
    pairs = Counter(zip(ids[:-1].tolist(), ids[1:].tolist()))
    for h in range(m.V):
        row = np.array([pairs.get((h, w), 0) for w in range(m.V)], dtype=float)
        n = row.sum()
        if n < 2000:
            continue
        p = m.distribution([h])
        sd = np.sqrt(n * p * (1 - p)) + 1
        assert np.all(np.abs(row - n * p) <= 5 * sd)


# -- normalization and serialization --------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.integers(0, 6), min_size=8, max_size=120).filter(lambda v: len(set(v)) >= 2),
    st.integers(1, 4),
    st.sampled_from(SCHEMES),
    st.lists(st.integers(0, 6), min_size=0, max_size=4),
)
def test_distribution_normalized(seq, n, scheme, ctx):
    stream = TokenStream.from_ids(seq)
    if len(stream) < n:
        return
    kwargs = {"weights": [1.0 / n] * n} if scheme == "interp" and len(seq) < 30 else {}
    try:
        m = ngram_train(stream, n, scheme, **kwargs)
    except InsufficientDataError:
        return
    ctx = [c % m.V for c in ctx]
    dist = m.distribution(ctx)
    assert np.all(dist >= 0)
    assert abs(dist.sum() - 1.0) <= 1e-9
    for w in range(m.V):
        assert m.prob(ctx, w) == pytest.approx(dist[w], abs=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_stream_probs_match_prob(scheme):
    stream = toy_corpus(1500, seed=3)
    m = ngram_train(stream, 3, scheme)
    ids = stream.tokens.tolist()
    model_ids, _ = m.encode(stream)
    probs, _ = m.stream_probs(model_ids)
    for i in range(0, 300, 7):
        ctx = model_ids[max(0, i - 2) : i].tolist()
        assert probs[i] == pytest.approx(m.prob(ctx, int(model_ids[i])), abs=1e-12)
    assert len(ids) == probs.size


@pytest.mark.parametrize("scheme", SCHEMES)
def test_save_load_roundtrip(tmp_path, scheme):
    m = ngram_train(toy_corpus(2000, seed=8), 3, scheme)
    path = tmp_path / "m.zip"
    m.save(path)
    first = path.read_bytes()
    back = NGramModel.load(path)
    assert back.order == m.order and back.smoothing == m.smoothing and back.vocab == m.vocab
    for k in range(1, 4):
        assert np.array_equal(back.counts[k], m.counts[k])
    ctx = [1, 2]
    assert np.array_equal(back.distribution(ctx), m.distribution(ctx))
    back.save(tmp_path / "again.zip")
    assert (tmp_path / "again.zip").read_bytes() == first
    assert np.array_equal(back.generate_ids(500, 1), m.generate_ids(500, 1))


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.zip"
    path.write_bytes(b"not a zip")
    with pytest.raises(FormatError):
        NGramModel.load(path)
