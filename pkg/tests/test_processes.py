import math
from collections import Counter

import numpy as np
import pytest

from langscale.genmodels import (
    PitmanYorParams,
    SimonParams,
    pitman_yor_branch_probs,
    pitman_yor_generate,
    simon_generate,
)
from langscale.genmodels.processes import pitman_yor_ids, simon_ids
from langscale.scaling import heaps, taylor, zipf


def test_params_validation():
    for a in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            SimonParams(a)
    with pytest.raises(ValueError):
        PitmanYorParams(1.0, 1.0)
    with pytest.raises(ValueError):
        PitmanYorParams(0.5, -1.0)
    PitmanYorParams(0.0, 0.0)


def test_simon_starts_with_word_zero_and_is_deterministic():
    a = simon_generate(SimonParams(0.3, seed=5), 500)
    b = simon_generate(SimonParams(0.3, seed=5), 500)
    assert a.tokens.tolist() == b.tokens.tolist()
    assert a.surfaces[0] == "0"
    assert a.tokens.tolist() != simon_generate(SimonParams(0.3, seed=6), 500).tokens.tolist()


def test_simon_no_innovation_limit():
    s = simon_generate(SimonParams(1e-9, seed=1), 1000)
    assert len(s.vocab) == 1


def test_simon_vocabulary_binomial():
    T, a = 10**5, 0.1
    sd = math.sqrt((T - 1) * a * (1 - a))
    for seed in range(5):
        V = len(simon_generate(SimonParams(a, seed), T).vocab)
        assert abs(V - (1 + a * (T - 1))) <= 3 * sd


def exact_simon(a, length):
    """Probability of every id sequence of the given length, by enumeration."""
    probs = {(0,): 1.0}
    for t in range(1, length):
        nxt = {}
        for seq, p in probs.items():
            K = max(seq) + 1
            new = seq + (K,)
            nxt[new] = nxt.get(new, 0.0) + p * a
            for k, n in Counter(seq).items():
                key = seq + (k,)
                nxt[key] = nxt.get(key, 0.0) + p * (1 - a) * n / t
        probs = nxt
    return probs


def test_simon_sequence_distribution():
    # frequency-proportional copying, checked against exact path probabilities
    a, L, trials = 0.3, 4, 20000
    exact = exact_simon(a, L)
    rng = np.random.default_rng(0)
    seen = Counter(tuple(simon_ids(a, L, rng).tolist()) for _ in range(trials))
    assert set(seen) <= set(exact)
    for seq, p in exact.items():
        sd = math.sqrt(trials * p * (1 - p))
        assert abs(seen[seq] - trials * p) <= 4.5 * sd + 1


def test_simon_zipf_slope():
    s = simon_generate(SimonParams(0.1, 0), 10**6)
    fit = zipf(s, 1).mid_rank_fit()
    assert abs(fit.exponent + 1.0) < 0.1
    assert abs(taylor(s).fit.exponent - 0.5) <= 0.02


def test_branch_probs_crp():
    t = 7
    existing, p_new = pitman_yor_branch_probs([t], 0.0, 1.0)
    assert p_new == pytest.approx(1 / (t + 1))
    assert existing.sum() + p_new == pytest.approx(1.0, abs=1e-12)


def test_pitman_yor_trace_oracle():
    for a, b in [(0.8, 1.0), (0.0, 1.0), (0.5, 0.0), (0.3, 7.5)]:
        trace = []
        ids = pitman_yor_ids(a, b, 101, np.random.default_rng(3), trace)
        assert len(trace) == 100
        for (t, K, p_new, p_exist), prefix_end in zip(trace, range(1, 101)):
            counts = np.bincount(ids[:prefix_end])
            assert t == prefix_end and K == counts.size
            existing, oracle_new = pitman_yor_branch_probs(counts, a, b)
            assert p_new == pytest.approx(oracle_new, abs=1e-12)
            assert p_exist == pytest.approx(existing.sum(), abs=1e-12)
            assert abs(p_new + p_exist - 1.0) <= 1e-12


def exact_py(a, b, length):
    probs = {(0,): 1.0}
    for t in range(1, length):
        nxt = {}
        for seq, p in probs.items():
            counts = Counter(seq)
            K = len(counts)
            new = seq + (K,)
            nxt[new] = nxt.get(new, 0.0) + p * (a * K + b) / (t + b)
            for k, n in counts.items():
                key = seq + (k,)
                nxt[key] = nxt.get(key, 0.0) + p * (n - a) / (t + b)
        probs = nxt
    return probs


def test_pitman_yor_sequence_distribution():
    a, b, L, trials = 0.5, 1.0, 5, 20000
    exact = exact_py(a, b, L)
    assert sum(exact.values()) == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    seen = Counter(tuple(pitman_yor_ids(a, b, L, rng).tolist()) for _ in range(trials))
    for seq, p in exact.items():
        sd = math.sqrt(trials * p * (1 - p))
        assert abs(seen[seq] - trials * p) <= 4.5 * sd + 1


def test_pitman_yor_heaps():
    s = pitman_yor_generate(PitmanYorParams(0.8, 1.0, seed=0), 10**6)
    assert abs(heaps(s).fit.exponent - 0.78) <= 0.05


def test_pitman_yor_deterministic():
    p = PitmanYorParams(0.4, 2.0, seed=9)
    assert pitman_yor_generate(p, 2000).tokens.tolist() == pitman_yor_generate(p, 2000).tokens.tolist()
