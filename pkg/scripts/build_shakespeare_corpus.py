"""Build tests/data/shakespeare.txt.gz from the `shakespeare` sdist on PyPI.

The sdist bundles the Project Gutenberg plain-text plays and poems. Each
work is lowercased and split into word and punctuation tokens, and the
works are concatenated in file-name order, one work per line.

    pip download --no-deps --no-binary :all: shakespeare==0.6 -d /tmp/sdist
    python scripts/build_shakespeare_corpus.py /tmp/sdist/shakespeare-0.6.tar.gz
"""

import argparse
import gzip
import re
import tarfile
from pathlib import Path

TOKEN_RE = re.compile(r"[a-z]+(?:'[a-z]+)*|[0-9]+|[^\sa-z0-9]")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("sdist")
    parser.add_argument(
        "--output",
        default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "shakespeare.txt.gz"),
    )
    args = parser.parse_args()

    with tarfile.open(args.sdist) as tar:
        names = sorted(
            m.name
            for m in tar.getmembers()
            if m.isfile()
            and "/shksprdata/texts/" in m.name
            and m.name.endswith("_gut.txt")
        )
        lines = []
        for name in names:
            text = tar.extractfile(name).read().decode("latin-1").lower()
            lines.append(" ".join(TOKEN_RE.findall(text)))

    # mtime=0 keeps the archive byte-identical across rebuilds
    with open(args.output, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
        gz.write(("\n".join(lines) + "\n").encode("utf-8"))
    print(f"{len(names)} works, {sum(len(l.split()) for l in lines)} tokens -> {args.output}")


if __name__ == "__main__":
    main()
