"""The five scaling analyses of a token stream.

Vocabulary population is covered by :func:`zipf` and :func:`heaps`; long
memory by :func:`ebeling` (characters), :func:`taylor` (words) and
:func:`lrc_analyze` (autocorrelation of rare-word return intervals).
:func:`full_report` runs all of them and collects the results.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateFitError,
    DegenerateSeriesError,
    InsufficientDataError,
    LangScaleError,
)
from .powerlaw import PowerLawFit, fit_power_law
from .textio import CharStream, TokenStream, to_char_stream

POSITIVE = "Positive"
WEAK = "Weak"
NO = "No"


def log_grid(lo, hi, per_decade):
    """Integers spaced evenly in log10 between ``lo`` and ``hi`` (both included)."""
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    a, b = np.log10(lo), np.log10(hi)
    steps = np.arange(np.floor(a * per_decade), np.floor(b * per_decade) + 1)
    grid = np.round(10.0 ** (steps / per_decade)).astype(np.int64)
    grid = grid[(grid >= lo) & (grid <= hi)]
    return np.unique(np.concatenate(([lo], grid, [hi]))).astype(np.int64)


# -- vocabulary population ---------------------------------------------------


@dataclass(frozen=True)
class RankFrequency:
    order: int
    frequencies: np.ndarray
    keys: tuple  # token-id tuples in rank order

    @property
    def ranks(self):
        return np.arange(1, self.frequencies.size + 1)

    def mid_rank_fit(self, lo=10, min_freq=10):
        """Fit over ranks from ``lo`` down to the last rank with ``min_freq`` occurrences.

        Returns None when that region has fewer than two ranks.
        """
        hi = int(np.count_nonzero(self.frequencies >= min_freq))
        if hi - lo < 1:
            return None
        r = self.ranks[lo - 1 : hi]
        return fit_power_law(r, self.frequencies[lo - 1 : hi])


def zipf(stream, order=1):
    """Rank-frequency table of words (order 1) or overlapping word pairs (order 2).

    Frequency ties keep first-occurrence order.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    tokens = stream.tokens
    if tokens.size < order:
        raise InsufficientDataError(f"need at least {order} tokens for order-{order} Zipf")
    V = max(len(stream.vocab), 1)
    keys = tokens if order == 1 else tokens[:-1] * V + tokens[1:]
    uniq, first, counts = np.unique(keys, return_index=True, return_counts=True)
    idx = np.lexsort((first, -counts))
    ordered = uniq[idx]
    if order == 1:
        key_tuples = tuple((int(k),) for k in ordered)
    else:
        key_tuples = tuple((int(k // V), int(k % V)) for k in ordered)
    return RankFrequency(order, counts[idx], key_tuples)


@dataclass(frozen=True)
class HeapsCurve:
    n: np.ndarray
    v: np.ndarray
    fit: PowerLawFit


def heaps(stream, samples_per_decade=10):
    N = len(stream)
    if N < 10:
        raise InsufficientDataError(f"Heaps analysis needs at least 10 tokens, got {N}")
    _, first = np.unique(stream.tokens, return_index=True)
    first.sort()
    n = log_grid(1, N, samples_per_decade)
    # v(n) = number of types whose first occurrence is among the first n tokens
    v = np.searchsorted(first, n, side="left")
    return HeapsCurve(n, v, fit_power_law(n, v))


# -- long memory ---------------------------------------------------------------


@dataclass(frozen=True)
class FluctuationCurve:
    lengths: np.ndarray
    m: np.ndarray
    fit: PowerLawFit


def window_count_variance(codes, n_symbols, l):
    """Sum over symbols of the population variance of per-window counts.

    ``codes`` are dense symbol indices; windows are consecutive and
    non-overlapping, the trailing remainder is dropped.
    """
    k = codes.size // l
    if k < 1:
        raise InsufficientDataError(f"window length {l} exceeds sequence length {codes.size}")
    used = codes[: k * l]
    totals = np.bincount(used, minlength=n_symbols)
    sumsq = 0
    # windows are processed in blocks so the count table stays small
    block = max(1, 4_000_000 // max(n_symbols, 1))
    for start in range(0, k, block):
        stop = min(k, start + block)
        chunk = used[start * l : stop * l]
        win = np.repeat(np.arange(stop - start, dtype=np.int64), l)
        counts = np.bincount(win * n_symbols + chunk, minlength=(stop - start) * n_symbols)
        sumsq += int(np.dot(counts, counts))
    # sum_c var_c = (k * sum y^2 - sum_c (sum_w y)^2) / k^2, exact in integers
    num = k * sumsq - int(np.dot(totals, totals))
    return num / (k * k)


def ebeling(chars, min_l=10, max_l=None, samples_per_decade=10):
    L = len(chars)
    if max_l is None:
        max_l = L // 100
    if max_l <= min_l or L < 10 * max_l:
        raise InsufficientDataError(
            f"{L} characters is too short for window lengths {min_l}..{max_l}"
        )
    codes = np.searchsorted(chars.alphabet, chars.chars)
    A = int(chars.alphabet.size)
    lengths = log_grid(min_l, max_l, samples_per_decade)
    m = np.array([window_count_variance(codes, A, int(l)) for l in lengths])
    keep = m > 0
    if np.count_nonzero(keep) < 2:
        raise DegenerateFitError("window-count variance vanishes at almost every length")
    lengths, m = lengths[keep], m[keep]
    return FluctuationCurve(lengths, m, fit_power_law(lengths, m))


@dataclass(frozen=True)
class TaylorScatter:
    segment_len: int
    n_segments: int
    word_ids: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    fit: PowerLawFit


def segment_moments(tokens, V, l):
    """Per-type mean and population standard deviation of counts per segment.

    Returns ``(k, ids, mu, sigma)`` for every type occurring in the first
    ``k * l`` tokens.
    """
    k = tokens.size // l
    used = tokens[: k * l]
    seg = np.repeat(np.arange(k, dtype=np.int64), l)
    keys, counts = np.unique(seg * V + used, return_counts=True)
    ids = keys % V
    totals = np.bincount(ids, weights=counts, minlength=V).astype(np.int64)
    sumsq = np.bincount(ids, weights=counts.astype(np.float64) ** 2, minlength=V)
    sumsq = np.rint(sumsq).astype(np.int64)
    present = np.flatnonzero(totals)
    tot = totals[present]
    var_num = k * sumsq[present] - tot * tot  # k^2 * variance, exact
    return k, present, tot / k, np.sqrt(var_num) / k


def taylor(stream, segment_len=5620):
    l = int(segment_len)
    if l < 2:
        raise ValueError("segment length must be at least 2")
    if len(stream) // l < 2:
        raise InsufficientDataError(
            f"{len(stream)} tokens give fewer than 2 segments of length {l}"
        )
    k, ids, mu, sigma = segment_moments(stream.tokens, len(stream.vocab), l)
    keep = sigma > 0
    if np.unique(mu[keep]).size < 2:
        raise DegenerateFitError("fewer than two distinct non-degenerate (mean, std) points")
    ids, mu, sigma = ids[keep], mu[keep], sigma[keep]
    return TaylorScatter(l, k, ids, mu, sigma, fit_power_law(mu, sigma))


def rare_word_intervals(stream, Q=16):
    """Return intervals between successive occurrences of the rarest words.

    Word types are taken in ascending frequency (ties: later first occurrence
    first) until their combined count first reaches ``N / Q``.
    """
    N = len(stream)
    if Q < 2:
        raise ValueError("Q must be at least 2")
    if N < Q:
        raise InsufficientDataError(f"{N} tokens is fewer than Q={Q}")
    tokens = stream.tokens
    V = len(stream.vocab)
    counts = np.bincount(tokens, minlength=V)
    first = np.full(V, N, dtype=np.int64)
    uniq, idx = np.unique(tokens, return_index=True)
    first[uniq] = idx
    present = np.flatnonzero(counts)
    order = present[np.lexsort((-first[present], counts[present]))]
    cum = np.cumsum(counts[order])
    n_types = int(np.searchsorted(cum, N / Q, side="left")) + 1
    selected = np.zeros(V, dtype=bool)
    selected[order[:n_types]] = True
    positions = np.flatnonzero(selected[tokens])
    if positions.size < 2:
        raise InsufficientDataError("fewer than two rare-word occurrences")
    return np.diff(positions)


def acf(series, max_lag):
    """Autocorrelation c(s), s = 1..max_lag, using the global mean and variance."""
    x = np.asarray(series, dtype=np.float64)
    T = x.size
    if T <= max_lag + 1:
        raise InsufficientDataError(f"series of length {T} too short for {max_lag} lags")
    d = x - x.mean()
    var = float(np.dot(d, d)) / T
    if var == 0.0:
        raise DegenerateSeriesError("series has zero variance")
    return np.array([np.dot(d[:-s], d[s:]) / (T - s) for s in range(1, max_lag + 1)]) / var


def lrc_verdict(c):
    """No / Weak / Positive from the signs of c(1..100)."""
    c = np.asarray(c)
    if np.count_nonzero(c[:10] < 0) >= 2:
        return NO
    if np.count_nonzero(c[:100] < 0) >= 1:
        return WEAK
    return POSITIVE


@dataclass(frozen=True)
class AcfSeries:
    Q: int
    intervals: np.ndarray
    c: np.ndarray  # c[s-1] = c(s)
    verdict: str
    fit: Optional[PowerLawFit]

    @property
    def lags(self):
        return np.arange(1, self.c.size + 1)

    @property
    def xi(self):
        return None if self.fit is None else -self.fit.exponent


def lrc_analyze(stream, Q=16, fit_max_lag=100, max_lag=None):
    intervals = rare_word_intervals(stream, Q)
    T = intervals.size
    if max_lag is None:
        max_lag = min(max(fit_max_lag, T // 100), T - 2)
    if max_lag < fit_max_lag:
        raise InsufficientDataError(
            f"{T} return intervals cannot support {fit_max_lag} autocorrelation lags"
        )
    c = acf(intervals, max_lag)
    verdict = lrc_verdict(c)
    fit = None
    if verdict != NO:
        s = np.arange(1, fit_max_lag + 1)
        head = c[:fit_max_lag]
        pos = head > 0
        if np.count_nonzero(pos) >= 2:
            fit = fit_power_law(s[pos], head[pos])
    return AcfSeries(Q, intervals, c, verdict, fit)


# -- combined report -------------------------------------------------------------


@dataclass(frozen=True)
class AnalysisConfig:
    taylor_l: int = 5620
    lrc_q: int = 16
    lrc_fit_max_lag: int = 100
    heaps_samples_per_decade: int = 10
    ebeling_samples_per_decade: int = 10
    ebeling_min_l: int = 10
    ebeling_max_l: Optional[int] = None
    characters: bool = True


EXPONENTS = ("beta", "eta", "zeta", "xi")


@dataclass
class ScalingReport:
    config: AnalysisConfig
    n_tokens: int
    vocab_size: int
    zipf: dict = field(default_factory=dict)  # order -> RankFrequency
    heaps: Optional[HeapsCurve] = None
    ebeling: Optional[FluctuationCurve] = None
    taylor: Optional[TaylorScatter] = None
    lrc: Optional[AcfSeries] = None
    errors: dict = field(default_factory=dict)  # section -> message
    deltas: dict = field(default_factory=dict)

    def exponents(self):
        out = dict.fromkeys(EXPONENTS)
        if self.heaps is not None:
            out["beta"] = self.heaps.fit.exponent
        if self.ebeling is not None:
            out["eta"] = self.ebeling.fit.exponent
        if self.taylor is not None:
            out["zeta"] = self.taylor.fit.exponent
        if self.lrc is not None:
            out["xi"] = self.lrc.xi
        return out

    def q1(self):
        """Qualitative presence of each property."""
        verdicts = {}
        if 1 in self.zipf:
            verdicts["zipf"] = "Yes" if self.zipf_mid_slope() is not None and self.zipf_mid_slope() < 0 else "No"
        if self.heaps is not None:
            verdicts["heaps"] = "Yes" if 0 < self.heaps.fit.exponent < 1 else "No"
        if self.ebeling is not None:
            verdicts["ebeling"] = "Yes" if self.ebeling.fit.exponent > 1.02 else "No"
        if self.taylor is not None:
            verdicts["taylor"] = "Yes" if self.taylor.fit.exponent > 0.52 else "No"
        if self.lrc is not None:
            verdicts["lrc"] = self.lrc.verdict
        return verdicts

    def zipf_mid_slope(self):
        rf = self.zipf.get(1)
        fit = None if rf is None else rf.mid_rank_fit()
        return None if fit is None else fit.exponent

    def to_dict(self):
        def fitd(f):
            return None if f is None else f.to_dict()

        sections = {}
        for order, rf in sorted(self.zipf.items()):
            fit = rf.mid_rank_fit()
            sections[f"zipf{order}"] = {
                "n_types": int(rf.frequencies.size),
                "mid_rank_fit": fitd(fit),
            }
        if self.heaps is not None:
            sections["heaps"] = {"fit": fitd(self.heaps.fit), "n_samples": int(self.heaps.n.size)}
        if self.ebeling is not None:
            sections["ebeling"] = {
                "fit": fitd(self.ebeling.fit),
                "min_l": int(self.ebeling.lengths[0]),
                "max_l": int(self.ebeling.lengths[-1]),
            }
        if self.taylor is not None:
            sections["taylor"] = {
                "fit": fitd(self.taylor.fit),
                "segment_len": self.taylor.segment_len,
                "n_segments": self.taylor.n_segments,
                "n_points": int(self.taylor.mu.size),
            }
        if self.lrc is not None:
            sections["lrc"] = {
                "fit": fitd(self.lrc.fit),
                "xi": self.lrc.xi,
                "verdict": self.lrc.verdict,
                "Q": self.lrc.Q,
                "n_intervals": int(self.lrc.intervals.size),
                "max_lag": int(self.lrc.c.size),
            }
        for name, msg in self.errors.items():
            sections[name] = {"error": msg}
        return {
            "config": asdict(self.config),
            "n_tokens": self.n_tokens,
            "vocab_size": self.vocab_size,
            "exponents": self.exponents(),
            "q1": self.q1(),
            "q2_deltas": dict(self.deltas),
            "sections": sections,
        }

    def point_sets(self):
        """``name -> (z, y)`` for every computed curve."""
        pts = {}
        for order, rf in sorted(self.zipf.items()):
            pts[f"zipf{order}"] = (rf.ranks, rf.frequencies)
        if self.heaps is not None:
            pts["heaps"] = (self.heaps.n, self.heaps.v)
        if self.ebeling is not None:
            pts["ebeling"] = (self.ebeling.lengths, self.ebeling.m)
        if self.taylor is not None:
            pts["taylor"] = (self.taylor.mu, self.taylor.sigma)
        if self.lrc is not None:
            pts["lrc"] = (self.lrc.lags, self.lrc.c)
        return pts


def _error_text(exc):
    return f"{type(exc).__name__}: {exc}"


def full_report(stream, config=None, reference=None):
    """Run every analysis; failures are recorded per section instead of raised."""
    config = config or AnalysisConfig()
    report = ScalingReport(config, len(stream), len(stream.vocab))

    def attempt(name, fn):
        try:
            return fn()
        except (LangScaleError, ValueError) as exc:
            report.errors[name] = _error_text(exc)
            return None

    for order in (1, 2):
        rf = attempt(f"zipf{order}", lambda: zipf(stream, order))
        if rf is not None:
            report.zipf[order] = rf
    report.heaps = attempt("heaps", lambda: heaps(stream, config.heaps_samples_per_decade))
    if config.characters:
        report.ebeling = attempt(
            "ebeling",
            lambda: ebeling(
                to_char_stream(stream),
                config.ebeling_min_l,
                config.ebeling_max_l,
                config.ebeling_samples_per_decade,
            ),
        )
    report.taylor = attempt("taylor", lambda: taylor(stream, config.taylor_l))
    report.lrc = attempt(
        "lrc", lambda: lrc_analyze(stream, config.lrc_q, config.lrc_fit_max_lag)
    )
    if reference is not None:
        mine, theirs = report.exponents(), reference.exponents()
        report.deltas = {
            k: (mine[k] - theirs[k])
            for k in EXPONENTS
            if mine[k] is not None and theirs[k] is not None
        }
    return report
