"""Command-line interface: ``langscale <subcommand> ...``.

Exit status: 0 success, 2 insufficient data, 3 input format error,
4 internal error. Every report embeds the tool version, the effective
configuration and the SHA-256 of its input, and nothing time-dependent,
so identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import traceback
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, pcfg
from .errors import InsufficientDataError, LangScaleError
from .genmodels import (
    NGramModel,
    PitmanYorParams,
    SimonParams,
    ngram_train,
    pitman_yor_generate,
    simon_generate,
)
from .genmodels.ngram import SMOOTHINGS
from .powerlaw import write_points
from .scaling import AnalysisConfig, full_report
from .textio import holdout_split, preprocess, read_tokens, shuffle_ngram, write_tokens

TOOL = "langscale"
BLANK = "-"
DEFAULT_LENGTH = 1_000_000
TOY_TREEBANK = "toy_treebank.mrg"


class UsageError(Exception):
    pass


# -- output helpers ----------------------------------------------------------------


def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(obj, path=None):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list) and not all(isinstance(v, (int, float, str)) for v in obj):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def dump_tsv(obj, path=None):
    lines = []
    for key, value in _flatten(_plain(obj)):
        if value is None:
            value = BLANK
        elif isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key}\t{value}")
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def dump(obj, path, fmt):
    (dump_json if fmt == "json" else dump_tsv)(obj, path)


def sha256_of(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def effective_config(args):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return _plain(cfg)


def header(args, inputs):
    return {
        "tool": TOOL,
        "version": __version__,
        "config": effective_config(args),
        "inputs": {str(p): sha256_of(p) for p in inputs},
    }


def load_stream(args, path=None):
    stream = read_tokens(path or args.input)
    if args.min_freq > 1 or args.replace_numbers:
        stream = preprocess(stream, args.min_freq, args.replace_numbers)
    return stream


def analysis_config(args, characters=True):
    return AnalysisConfig(taylor_l=args.taylor_l, lrc_q=args.lrc_q, characters=characters)


FITTED = ("heaps", "ebeling", "taylor", "lrc")


def write_report_dir(report, outdir, head, fmt):
    """``report.{json,tsv}``, one point file per curve, and a gnuplot stub."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    doc = dict(head)
    doc["report"] = report.to_dict()
    dump(doc, outdir / f"report.{fmt}", fmt)
    gp = ["set logscale xy", "set key left top"]
    sections = doc["report"]["sections"]
    for name, (z, y) in report.point_sets().items():
        keep = (np.asarray(z) > 0) & (np.asarray(y) > 0) if name == "lrc" else slice(None)
        fname = f"{name}.tsv"
        write_points(outdir / fname, np.asarray(z)[keep], np.asarray(y)[keep], header=f"{name}\tz\ty")
        fit = sections.get(name, {}).get("fit") if name in FITTED else None
        gp.append(f"set title '{name}'")
        if fit:
            c, k = fit["coefficient"], fit["exponent"]
            gp.append(f"plot '{fname}' using 1:2 title 'data', {c!r}*x**({k!r}) title 'fit'")
        else:
            gp.append(f"plot '{fname}' using 1:2 title 'data'")
        gp.append("pause -1")
    (outdir / "plot.gp").write_text("\n".join(gp) + "\n", encoding="utf-8")
    return doc


# -- subcommands -------------------------------------------------------------------


def cmd_analyze(args):
    stream = load_stream(args)
    reference = None
    if args.reference:
        reference = full_report(load_stream(args, args.reference), analysis_config(args, args.characters))
    report = full_report(stream, analysis_config(args, args.characters), reference)
    inputs = [args.input] + ([args.reference] if args.reference else [])
    write_report_dir(report, args.output, header(args, inputs), args.format)
    if report.errors:
        for name, msg in sorted(report.errors.items()):
            print(f"{name}: {msg}", file=sys.stderr)
        return InsufficientDataError.exit_code
    return 0


def cmd_shuffle(args):
    stream = read_tokens(args.input)
    write_tokens(shuffle_ngram(stream, args.n, args.seed), args.output)
    return 0


def cmd_train(args):
    stream = load_stream(args)
    model = ngram_train(
        stream,
        n=args.order,
        smoothing=args.smoothing,
        held_out_fraction=args.held_out_fraction,
        katz_k=args.katz_k,
    )
    model.save(args.output)
    return 0


def cmd_generate(args):
    chosen = [x is not None for x in (args.model, args.simon_a, args.py_a)]
    if sum(chosen) != 1:
        raise UsageError("choose exactly one of --model, --simon-a, --py-a")
    if args.model:
        stream = NGramModel.load(args.model).generate(args.length, args.seed)
    elif args.simon_a is not None:
        stream = simon_generate(SimonParams(args.simon_a, args.seed), args.length)
    else:
        stream = pitman_yor_generate(PitmanYorParams(args.py_a, args.py_b, args.seed), args.length)
    write_tokens(stream, args.output)
    return 0


def cmd_score(args):
    model = NGramModel.load(args.model)
    stream = load_stream(args)
    result = model.perplexity(stream)
    doc = header(args, [args.model, args.input])
    doc["model"] = {"order": model.order, "smoothing": model.smoothing, "vocab_size": model.V}
    doc["score"] = result.to_dict()
    dump(doc, args.output, args.format)
    return 0


def _chunks(stream, lengths, per_length, seed):
    rng = np.random.default_rng(seed)
    surfaces = stream.vocab.id_to_surface
    items = []
    for n in lengths:
        if n > len(stream):
            continue
        for start in rng.integers(0, len(stream) - n + 1, size=per_length).tolist():
            items.append([surfaces[i] for i in stream.tokens[start : start + n].tolist()])
    return items


def _length_range(text):
    lo, _, hi = text.partition("-")
    lo, hi = int(lo), int(hi or lo)
    if not 1 <= lo <= hi:
        raise UsageError(f"bad length range {text!r}")
    return range(lo, hi + 1)


def cmd_pcfg(args):
    if args.input:
        tb_path = Path(args.input)
        trees = pcfg.read_treebank(tb_path)
    else:
        ref = resources.files("langscale") / "data" / TOY_TREEBANK
        with resources.as_file(ref) as tb_path:
            trees = pcfg.read_treebank(tb_path)
            digest = sha256_of(tb_path)
    grammar = pcfg.induce_grammar(trees, unk=args.unk)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    grammar.write(outdir / "grammar.tsv")

    inputs = [args.input] if args.input else []
    if args.sentences:
        items = [line.split() for line in Path(args.sentences).read_text(encoding="utf-8").splitlines()]
        items = [s for s in items if s]
        inputs.append(args.sentences)
        source = "sentences"
    elif args.text:
        items = _chunks(load_stream(args, args.text), _length_range(args.chunk_lengths), args.chunks_per_length, args.seed)
        inputs.append(args.text)
        source = "chunks"
    else:
        samples = pcfg.sample_sentences(grammar, args.samples, args.seed, args.max_depth, args.max_len)
        items = [list(s.tokens) for s in samples]
        source = "samples"
    items = [s for s in items if len(s) <= args.max_len]
    profile = pcfg.nll_length_profile(grammar, items, args.max_len)

    doc = header(args, inputs)
    if not args.input:
        doc["inputs"][f"<bundled>/{TOY_TREEBANK}"] = digest
    doc["grammar"] = {"start": grammar.start, "n_productions": len(grammar), "n_trees": len(trees)}
    doc["items"] = {"source": source, "count": len(items)}
    doc["profile"] = profile.to_dict()
    if args.format == "json":
        dump_json(doc, outdir / "profile.json")
    else:
        meta = [f"# tool\t{TOOL} {__version__}"]
        meta += [f"# input\t{k}\t{v}" for k, v in sorted(doc["inputs"].items())]
        meta.append("# unit\tnats")
        (outdir / "profile.tsv").write_text("\n".join(meta) + "\n" + profile.to_tsv(), encoding="utf-8")
    return 0


# -- pipeline ------------------------------------------------------------------------

# (name, kind, params); the row index fixes the seed (base seed + index)
PIPELINE_ROWS = [
    ("original", "original", {}),
    ("shuffle-1", "shuffle", {"n": 1}),
    ("shuffle-2", "shuffle", {"n": 2}),
    ("shuffle-5", "shuffle", {"n": 5}),
    ("shuffle-10", "shuffle", {"n": 10}),
    ("3-gram", "ngram", {"n": 3, "smoothing": "mle"}),
    ("5-gram", "ngram", {"n": 5, "smoothing": "mle"}),
    ("interp-3", "ngram", {"n": 3, "smoothing": "interp"}),
    ("katz-3", "ngram", {"n": 3, "smoothing": "katz"}),
    ("katz-5", "ngram", {"n": 5, "smoothing": "katz"}),
    ("kn-3", "ngram", {"n": 3, "smoothing": "kn"}),
    ("kn-5", "ngram", {"n": 5, "smoothing": "kn"}),
    ("simon", "simon", {}),
    ("pitman-yor", "pitman-yor", {}),
]

SUMMARY_COLUMNS = [
    "row", "model", "seed", "tokens", "perplexity", "zipf",
    "beta", "beta_eps", "eta", "eta_eps", "zeta", "zeta_eps",
    "lrc", "xi", "xi_eps", "error",
]


def _fit_cells(section):
    fit = section.get("fit") if section else None
    if not fit:
        return None, None
    return fit["exponent"], fit["rms_error"]


def summary_row(index, name, seed, report, ppl=None, error=None):
    row = dict.fromkeys(SUMMARY_COLUMNS)
    row.update(row=index, model=name, seed=seed, error=error)
    if ppl is not None:
        row["perplexity"] = ppl.value
    if report is not None:
        d = report.to_dict()
        sec = d["sections"]
        row["tokens"] = d["n_tokens"]
        row["zipf"] = d["q1"].get("zipf")
        row["beta"], row["beta_eps"] = _fit_cells(sec.get("heaps"))
        row["eta"], row["eta_eps"] = _fit_cells(sec.get("ebeling"))
        row["zeta"], row["zeta_eps"] = _fit_cells(sec.get("taylor"))
        lrc = sec.get("lrc", {})
        row["lrc"] = lrc.get("verdict")
        if lrc.get("fit"):
            row["xi"] = lrc["xi"]
            row["xi_eps"] = lrc["fit"]["rms_error"]
        errs = [f"{k}: {v}" for k, v in sorted(report.errors.items())]
        if errs and error is None:
            row["error"] = "; ".join(errs)
    return row


def _cell(value):
    if value is None:
        return BLANK
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.4f}"
    return str(value).replace("\t", " ").replace("\n", " ")


def summary_tsv(rows):
    lines = ["\t".join(SUMMARY_COLUMNS)]
    lines += ["\t".join(_cell(r[c]) for c in SUMMARY_COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"


def _error_text(exc):
    return f"{type(exc).__name__}: {exc}"


def cmd_pipeline(args):
    corpus = load_stream(args)
    if len(corpus) == 0:
        raise InsufficientDataError(f"{args.input}: corpus is empty")
    warnings = []
    if len(corpus) < DEFAULT_LENGTH:
        warnings.append(
            f"corpus has {len(corpus)} tokens (< {DEFAULT_LENGTH}); exponents will have wide variance"
        )
    wanted = set(args.rows.split(",")) if args.rows else None
    known = {name for name, _, _ in PIPELINE_ROWS}
    if wanted and not wanted <= known:
        raise UsageError(f"unknown rows: {sorted(wanted - known)}; choose from {sorted(known)}")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)

    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    head = header(args, [args.input])
    train, test, n_test_oov = holdout_split(corpus, args.test_fraction)

    original = None
    rows = []
    for index, (name, kind, params) in enumerate(PIPELINE_ROWS):
        # the original row always runs; it is the reference for deltas
        if wanted and name not in wanted and name != "original":
            continue
        seed = args.seed + index
        report = ppl = None
        try:
            characters = True
            if kind == "original":
                stream = corpus
            elif kind == "shuffle":
                stream = shuffle_ngram(corpus, params["n"], seed)
            elif kind == "ngram":
                model = ngram_train(train, n=params["n"], smoothing=params["smoothing"])
                if len(test):
                    ppl = model.perplexity(test)
                stream = model.generate(args.length, seed)
            elif kind == "simon":
                stream = simon_generate(SimonParams(args.simon_a, seed), args.length)
                characters = False
            else:
                stream = pitman_yor_generate(PitmanYorParams(args.py_a, args.py_b, seed), args.length)
                characters = False
            report = full_report(stream, analysis_config(args, characters), original)
            if kind == "original":
                original = report
            if args.row_reports:
                row_head = dict(head)
                row_head["row"] = {"index": index, "name": name, "seed": seed}
                write_report_dir(report, outdir / "rows" / f"{index:02d}-{name}", row_head, args.format)
            rows.append(summary_row(index, name, seed, report, ppl))
        except (LangScaleError, ValueError) as exc:
            rows.append(summary_row(index, name, seed, report, ppl, _error_text(exc)))
        if args.verbose:
            print(f"[{index:2d}] {name} done", file=sys.stderr)

    (outdir / "summary.tsv").write_text(summary_tsv(rows), encoding="utf-8")
    doc = dict(head)
    doc["columns"] = SUMMARY_COLUMNS
    doc["rows"] = rows
    doc["warnings"] = warnings
    doc["split"] = {"train_tokens": len(train), "test_tokens": len(test), "test_oov_tokens": n_test_oov}
    dump_json(doc, outdir / "summary.json")
    return 0


# -- argument parsing ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_preprocess(p):
    p.add_argument("--min-freq", type=int, default=1, help="map words rarer than this to <unk>")
    p.add_argument("--replace-numbers", action="store_true", help="map numbers to N")


def _add_analysis(p):
    p.add_argument("--taylor-l", type=int, default=5620, help="Taylor segment length")
    p.add_argument("--lrc-q", type=int, default=16, help="rare-word mass divisor Q")


def build_parser():
    parser = _Parser(prog=TOOL, description="Scaling-property analysis of text and baseline language models.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="measure the scaling properties of a token file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--reference", help="training corpus for exponent deltas")
    p.add_argument("--no-characters", dest="characters", action="store_false",
                   help="skip the character-level fluctuation analysis")
    p.add_argument("--format", choices=("json", "tsv"), default="json")
    _add_analysis(p)
    _add_preprocess(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("shuffle", help="shuffle a token file in chunks of n tokens")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--n", type=int, default=1, help="chunk size")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_shuffle)

    p = sub.add_parser("train", help="train an n-gram model")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="model file")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--smoothing", choices=SMOOTHINGS, default="kn")
    p.add_argument("--held-out-fraction", type=float, default=0.1,
                   help="tail fraction used to tune interpolation weights")
    p.add_argument("--katz-k", type=int, default=5, help="Good-Turing count threshold")
    _add_preprocess(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate text from a model or a urn process")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--length", type=int, default=DEFAULT_LENGTH)
    p.add_argument("--model", help="n-gram model file")
    p.add_argument("--simon-a", type=float)
    p.add_argument("--py-a", type=float)
    p.add_argument("--py-b", type=float, default=1.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("score", help="perplexity of a token file under a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="defaults to stdout")
    p.add_argument("--format", choices=("json", "tsv"), default="json")
    _add_preprocess(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("pcfg", help="induce a PCFG and profile NLL against length")
    p.add_argument("--input", help="bracketed treebank (default: bundled toy treebank)")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unk", action="store_true", help="add <unk> from hapax words")
    p.add_argument("--samples", type=int, default=1000, help="sampled sentences to score")
    p.add_argument("--sentences", help="score these sentences instead, one per line")
    p.add_argument("--text", help="score random chunks of this token file instead")
    p.add_argument("--chunk-lengths", default="2-20", help="chunk length range, e.g. 2-20")
    p.add_argument("--chunks-per-length", type=int, default=20)
    p.add_argument("--max-len", type=int, default=pcfg.DEFAULT_MAX_LEN)
    p.add_argument("--max-depth", type=int, default=100)
    p.add_argument("--format", choices=("json", "tsv"), default="tsv")
    _add_preprocess(p)
    p.set_defaults(func=cmd_pcfg)

    p = sub.add_parser("pipeline", help="reproduce the model comparison table on a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="row i uses seed + i")
    p.add_argument("--length", type=int, default=DEFAULT_LENGTH, help="tokens generated per model row")
    p.add_argument("--test-fraction", type=float, default=0.1, help="held-out tail for perplexity")
    p.add_argument("--rows", help="comma-separated subset of rows")
    p.add_argument("--simon-a", type=float, default=0.1)
    p.add_argument("--py-a", type=float, default=0.8)
    p.add_argument("--py-b", type=float, default=1.0)
    p.add_argument("--no-row-reports", dest="row_reports", action="store_false")
    p.add_argument("--format", choices=("json", "tsv"), default="json",
                   help="format of the per-row reports (the summary is written as both)")
    p.add_argument("-v", "--verbose", action="store_true")
    _add_analysis(p)
    _add_preprocess(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"{TOOL}: usage error: {exc}", file=sys.stderr)
        return 3
    except LangScaleError as exc:
        print(f"{TOOL}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"{TOOL}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"{TOOL}: invalid value: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
