"""Probabilistic context-free grammars from bracketed treebanks.

Reads Penn-style trees, induces relative-frequency PCFGs, converts them to
a Viterbi-equivalent CNF, scores sentences with CKY and samples sentences
top-down. All log-likelihoods are natural-log (nats).
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError, InsufficientDataError, VocabularyError

UNK = "<unk>"
DEFAULT_MAX_LEN = 50


# -- trees -------------------------------------------------------------------------


@dataclass
class Tree:
    label: str
    children: list = field(default_factory=list)  # Tree or str (terminal)

    def leaves(self):
        out = []
        for c in self.children:
            if isinstance(c, Tree):
                out.extend(c.leaves())
            else:
                out.append(c)
        return out

    def productions(self):
        """``(lhs, rhs, lexical)`` triples in preorder."""
        rhs = tuple(c.label if isinstance(c, Tree) else c for c in self.children)
        lexical = bool(self.children) and not isinstance(self.children[0], Tree)
        out = [(self.label, rhs, lexical)]
        for c in self.children:
            if isinstance(c, Tree):
                out.extend(c.productions())
        return out

    def __str__(self):
        inner = " ".join(str(c) for c in self.children)
        return f"({self.label} {inner})"


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


def _normalize_label(label):
    if label.startswith("-") and label.endswith("-"):
        return label  # -NONE-, -LRB-, ...
    return re.split(r"[-=]", label, maxsplit=1)[0] or label


def parse_trees(text, strip=True):
    """Parse one or more bracketed trees.

    With ``strip``, function tags are removed from labels and ``-NONE-``
    subtrees (plus any nodes they leave empty) are deleted. A label-less
    outer bracket with one child is unwrapped.
    """
    tokens = _TOKEN_RE.findall(text)
    pos = 0
    trees = []

    def parse_node(index):
        nonlocal pos
        if tokens[pos] != "(":
            raise FormatError(f"tree {index}: expected '(' at token {pos}")
        pos += 1
        label = ""
        if pos < len(tokens) and tokens[pos] not in "()":
            label = tokens[pos]
            pos += 1
        children = []
        while True:
            if pos >= len(tokens):
                raise FormatError(f"tree {index}: unbalanced parentheses")
            tok = tokens[pos]
            if tok == ")":
                pos += 1
                break
            if tok == "(":
                children.append(parse_node(index))
            else:
                children.append(tok)
                pos += 1
        return Tree(label, children)

    while pos < len(tokens):
        if tokens[pos] == ")":
            raise FormatError(f"tree {len(trees)}: unexpected ')'")
        tree = parse_node(len(trees))
        if not tree.label and len(tree.children) == 1 and isinstance(tree.children[0], Tree):
            tree = tree.children[0]
        if strip:
            tree = _strip(tree)
            if tree is None:
                continue
        trees.append(tree)
    return trees


def _strip(tree):
    if tree.label == "-NONE-":
        return None
    children = []
    for c in tree.children:
        if isinstance(c, Tree):
            c = _strip(c)
            if c is None:
                continue
        children.append(c)
    if not children:
        return None
    return Tree(_normalize_label(tree.label), children)


def read_treebank(path):
    return parse_trees(Path(path).read_text(encoding="utf-8"))


def check_tree(tree, index=0):
    """Every node labeled; terminals only as the single child of a preterminal."""
    stack = [tree]
    while stack:
        node = stack.pop()
        if not node.label:
            raise FormatError(f"tree {index}: unlabeled node")
        if not node.children:
            raise FormatError(f"tree {index}: node {node.label} has no children")
        kinds = {isinstance(c, Tree) for c in node.children}
        if False in kinds and (len(node.children) != 1):
            raise FormatError(f"tree {index}: node {node.label} mixes words and subtrees")
        stack.extend(c for c in node.children if isinstance(c, Tree))


# -- grammar -------------------------------------------------------------------------


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple
    prob: float


class PcfgGrammar:
    """Weighted productions; a symbol is a nonterminal iff it is some rule's lhs."""

    def __init__(self, productions, start, normalized=True):
        self.productions = tuple(productions)
        self.start = start
        self.normalized = normalized
        self.nonterminals = frozenset(p.lhs for p in self.productions)
        self.terminals = frozenset(
            s for p in self.productions for s in p.rhs if s not in self.nonterminals
        )
        by_lhs = defaultdict(list)
        for p in self.productions:
            if not p.prob > 0:
                raise ValueError(f"production {p.lhs} -> {' '.join(p.rhs)} has probability {p.prob}")
            if not p.rhs:
                raise ValueError(f"empty right-hand side for {p.lhs}")
            by_lhs[p.lhs].append(p)
        self.by_lhs = dict(by_lhs)
        if start not in self.nonterminals:
            raise ValueError(f"start symbol {start!r} has no productions")
        if normalized:
            for lhs, prods in self.by_lhs.items():
                total = math.fsum(p.prob for p in prods)
                if abs(total - 1.0) > 1e-9:
                    raise ValueError(f"productions of {lhs} sum to {total}, not 1")

    def __len__(self):
        return len(self.productions)

    def is_terminal(self, symbol):
        return symbol not in self.nonterminals

    def prob(self, lhs, rhs):
        for p in self.by_lhs.get(lhs, ()):
            if p.rhs == tuple(rhs):
                return p.prob
        return 0.0

    def is_cnf(self):
        for p in self.productions:
            if len(p.rhs) == 1:
                if not self.is_terminal(p.rhs[0]):
                    return False
            elif len(p.rhs) == 2:
                if any(self.is_terminal(s) for s in p.rhs):
                    return False
            else:
                return False
        return True

    def to_text(self):
        lines = [
            f"{p.lhs}\t{' '.join(p.rhs)}\t{p.prob!r}"
            for p in sorted(self.productions, key=lambda p: (p.lhs != self.start, p.lhs, p.rhs))
        ]
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text, start=None, normalized=True):
        prods = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"line {lineno}: expected lhs<TAB>rhs<TAB>probability")
            try:
                prob = float(parts[2])
            except ValueError:
                raise FormatError(f"line {lineno}: bad probability {parts[2]!r}") from None
            prods.append(Production(parts[0], tuple(parts[1].split()), prob))
        if not prods:
            raise FormatError("grammar file has no productions")
        return cls(prods, start or prods[0].lhs, normalized)

    @classmethod
    def read(cls, path, start=None):
        return cls.from_text(Path(path).read_text(encoding="utf-8"), start)


def induce_grammar(treebank, unk=False, root="TOP"):
    """Relative-frequency PCFG of a list of trees.

    With ``unk``, words seen once in the treebank are replaced by ``<unk>``.
    If the trees have more than one root label, a fresh ``root`` symbol
    rewrites to each observed root.
    """
    if not treebank:
        raise InsufficientDataError("empty treebank")
    for i, t in enumerate(treebank):
        if not isinstance(t, Tree):
            raise FormatError(f"tree {i}: not a tree")
        check_tree(t, i)
    hapax = set()
    if unk:
        words = Counter(w for t in treebank for w in t.leaves())
        hapax = {w for w, c in words.items() if c == 1}
    counts = Counter()
    roots = Counter()
    for t in treebank:
        roots[t.label] += 1
        for lhs, rhs, lexical in t.productions():
            if lexical and rhs[0] in hapax:
                rhs = (UNK,)
            counts[(lhs, rhs)] += 1
    if len(roots) == 1:
        start = next(iter(roots))
    else:
        start = root
        while any(start == lhs for lhs, _ in counts):
            start += "*"
        for label, c in roots.items():
            counts[(start, (label,))] += c
    lhs_totals = Counter()
    for (lhs, _), c in counts.items():
        lhs_totals[lhs] += c
    prods = [
        Production(lhs, rhs, c / lhs_totals[lhs])
        for (lhs, rhs), c in sorted(counts.items())
    ]
    return PcfgGrammar(prods, start)


# -- CNF conversion ------------------------------------------------------------------------


def binarize(grammar):
    """Viterbi-equivalent CNF grammar.

    Right-factors long rules through fresh ``A|X.Y`` symbols, lifts
    terminals out of long rules, and collapses unary nonterminal chains by
    max-product closure. The best-parse probability of every sentence is
    unchanged; the result is not normalized per lhs once unaries are folded.
    """
    nts = set(grammar.nonterminals)
    rules = {}  # (lhs, rhs) -> prob, keeps the max on collisions

    def add(lhs, rhs, prob):
        key = (lhs, tuple(rhs))
        if prob > rules.get(key, 0.0):
            rules[key] = prob

    def fresh(name):
        while name in grammar.nonterminals or name in grammar.terminals:
            name += "'"
        return name

    pre = {}
    for p in grammar.productions:
        rhs = list(p.rhs)
        if len(rhs) >= 2:
            for i, s in enumerate(rhs):
                if s not in grammar.nonterminals:
                    if s not in pre:
                        pre[s] = fresh(f"T|{s}")
                        nts.add(pre[s])
                        add(pre[s], (s,), 1.0)
                    rhs[i] = pre[s]
        lhs, prob = p.lhs, p.prob
        while len(rhs) > 2:
            inter = fresh(f"{p.lhs}|{'.'.join(rhs[1:])}")
            nts.add(inter)
            add(lhs, (rhs[0], inter), prob)
            lhs, prob, rhs = inter, 1.0, rhs[1:]
        add(lhs, rhs, prob)

    unary = defaultdict(dict)  # A -> {B: best prob of chain A =>* B}
    others = defaultdict(list)
    for (lhs, rhs), prob in rules.items():
        if len(rhs) == 1 and rhs[0] in nts:
            if rhs[0] != lhs:
                unary[lhs][rhs[0]] = max(prob, unary[lhs].get(rhs[0], 0.0))
        else:
            others[lhs].append((rhs, prob))
    closure = {a: {a: 1.0} for a in nts}
    for a in nts:
        # best unary chains from a; probabilities <= 1 so cycles never help
        best = closure[a]
        frontier = [a]
        while frontier:
            nxt = []
            for b in frontier:
                for c, p in unary.get(b, {}).items():
                    v = best[b] * p
                    if v > best.get(c, 0.0):
                        best[c] = v
                        nxt.append(c)
            frontier = nxt
    out = {}
    for a in nts:
        for b, pb in closure[a].items():
            for rhs, p in others.get(b, ()):
                v = pb * p
                if v > out.get((a, rhs), 0.0):
                    out[(a, rhs)] = v
    prods = [Production(l, r, p) for (l, r), p in sorted(out.items())]
    return PcfgGrammar(prods, grammar.start, normalized=False)


# -- CKY -------------------------------------------------------------------------------------


class CkyParser:
    """Viterbi CKY over a CNF grammar (see :func:`binarize`)."""

    def __init__(self, cnf, max_len=DEFAULT_MAX_LEN):
        if not cnf.is_cnf():
            raise ValueError("CKY needs a CNF grammar; call binarize() first")
        self.grammar = cnf
        self.max_len = max_len
        self.symbols = sorted(cnf.nonterminals)
        self.index = {s: i for i, s in enumerate(self.symbols)}
        self.start = self.index[cnf.start]
        lex = defaultdict(list)
        A, B, C, lp = [], [], [], []
        for p in cnf.productions:
            if len(p.rhs) == 1:
                lex[p.rhs[0]].append((self.index[p.lhs], math.log(p.prob)))
            else:
                A.append(self.index[p.lhs])
                B.append(self.index[p.rhs[0]])
                C.append(self.index[p.rhs[1]])
                lp.append(math.log(p.prob))
        self.lex = {w: (np.array([a for a, _ in v]), np.array([l for _, l in v])) for w, v in lex.items()}
        self.A = np.array(A, dtype=np.int64)
        self.B = np.array(B, dtype=np.int64)
        self.C = np.array(C, dtype=np.int64)
        self.lp = np.array(lp, dtype=np.float64)

    def map_tokens(self, sentence):
        out = []
        for w in sentence:
            if w in self.lex:
                out.append(w)
            elif UNK in self.lex:
                out.append(UNK)
            else:
                raise VocabularyError(f"word {w!r} is not a terminal of the grammar")
        return out

    def chart(self, sentence):
        words = self.map_tokens(sentence)
        n = len(words)
        if n < 1:
            raise InsufficientDataError("cannot parse an empty sentence")
        if n > self.max_len:
            raise ValueError(f"sentence length {n} exceeds the cap of {self.max_len}")
        S = len(self.symbols)
        chart = np.full((n, n + 1, S), -np.inf)
        for i, w in enumerate(words):
            a, l = self.lex[w]
            np.maximum.at(chart[i, i + 1], a, l)
        for span in range(2, n + 1):
            for i in range(0, n - span + 1):
                j = i + span
                cell = chart[i, j]
                for k in range(i + 1, j):
                    left, right = chart[i, k], chart[k, j]
                    score = left[self.B] + right[self.C] + self.lp
                    ok = np.isfinite(score)
                    if ok.any():
                        np.maximum.at(cell, self.A[ok], score[ok])
        return chart

    def nll(self, sentence):
        """Best-parse negative log-likelihood; ``math.inf`` if unparseable."""
        chart = self.chart(sentence)
        best = chart[0, len(sentence), self.start]
        return math.inf if not np.isfinite(best) else float(-best)


def viterbi_nll(cnf, sentence, max_len=DEFAULT_MAX_LEN):
    return CkyParser(cnf, max_len).nll(sentence)


# -- sampling ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class SampledSentence:
    tokens: Optional[tuple]
    logprob: float  # log-probability of the sampled derivation
    depth_exceeded: bool = False

    @property
    def nll(self):
        return -self.logprob


class _Sampler:
    def __init__(self, grammar):
        self.grammar = grammar
        self.table = {}
        for lhs, prods in grammar.by_lhs.items():
            probs = np.array([p.prob for p in prods])
            self.table[lhs] = ([p.rhs for p in prods], np.cumsum(probs), np.log(probs))

    def sample(self, rng, max_depth, max_symbols=10_000):
        out = []
        logprob = 0.0
        stack = [(self.grammar.start, 0)]
        emitted = 0
        while stack:
            sym, depth = stack.pop()
            if sym not in self.table:
                out.append(sym)
                continue
            if depth >= max_depth or emitted > max_symbols:
                return SampledSentence(None, logprob, True)
            rhss, cdf, logp = self.table[sym]
            i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            i = min(i, len(rhss) - 1)
            logprob += logp[i]
            emitted += len(rhss[i])
            # push in reverse so the leftmost symbol expands first
            stack.extend((s, depth + 1) for s in reversed(rhss[i]))
        return SampledSentence(tuple(out), logprob)


def sample_sentence(grammar, seed, max_depth=100):
    """One top-down sample; ``depth_exceeded`` is set instead of recursing forever."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _Sampler(grammar).sample(rng, max_depth)


def sample_sentences(grammar, count, seed, max_depth=100, max_len=None, max_tries=None):
    """``count`` completed samples, resampling depth-exceeded or over-long draws."""
    rng = np.random.default_rng(seed)
    sampler = _Sampler(grammar)
    out = []
    tries = 0
    limit = max_tries if max_tries is not None else 100 * count + 1000
    while len(out) < count:
        tries += 1
        if tries > limit:
            raise InsufficientDataError(f"only {len(out)} of {count} samples completed in {limit} tries")
        s = sampler.sample(rng, max_depth)
        if s.depth_exceeded or (max_len is not None and len(s.tokens) > max_len):
            continue
        out.append(s)
    return out


# -- NLL versus length --------------------------------------------------------------------


@dataclass
class NllProfile:
    rows: list  # (length, mean, min, max, count)
    n_unparseable: int
    pearson: Optional[float]

    def to_tsv(self):
        lines = ["# length\tmean_nll\tmin_nll\tmax_nll\tcount"]
        lines += [f"{n}\t{m!r}\t{lo!r}\t{hi!r}\t{c}" for n, m, lo, hi, c in self.rows]
        lines.append(f"# unparseable\t{self.n_unparseable}")
        lines.append(f"# pearson_length_mean_nll\t{self.pearson!r}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "unit": "nats",
            "rows": [
                {"length": n, "mean": m, "min": lo, "max": hi, "count": c}
                for n, m, lo, hi, c in self.rows
            ],
            "n_unparseable": self.n_unparseable,
            "pearson": self.pearson,
        }


def profile_from_scores(scored):
    """Aggregate ``(length, nll)`` pairs; infinite NLL counts as unparseable."""
    groups = defaultdict(list)
    bad = 0
    for length, nll in scored:
        if math.isinf(nll):
            bad += 1
        else:
            groups[length].append(nll)
    rows = [
        (n, math.fsum(v) / len(v), min(v), max(v), len(v))
        for n, v in sorted(groups.items())
    ]
    pearson = None
    if len(rows) >= 2:
        x = np.array([r[0] for r in rows], dtype=float)
        y = np.array([r[1] for r in rows])
        if x.std() > 0 and y.std() > 0:
            pearson = float(np.corrcoef(x, y)[0, 1])
    return NllProfile(rows, bad, pearson)


def nll_length_profile(grammar, items, max_len=DEFAULT_MAX_LEN):
    """Per-length mean/min/max Viterbi NLL of ``items`` (token sequences)."""
    if not items:
        raise InsufficientDataError("no items to profile")
    cnf = grammar if grammar.is_cnf() else binarize(grammar)
    parser = CkyParser(cnf, max_len)
    return profile_from_scores((len(s), parser.nll(s)) for s in items)
