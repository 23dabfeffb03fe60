import gzip
import os
from pathlib import Path

import pytest

from langscale.textio import read_tokens, tokenize

DATA = Path(__file__).parent / "data"
SHAKESPEARE = DATA / "shakespeare.txt.gz"

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.addinivalue_line("markers", "slow: long-running corpus-scale test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    status = "skipped" if rep.skipped else "passed" if rep.passed else "failed"
    _criteria.setdefault(marker.args[0], []).append((item.name, status))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        results = _criteria[n]
        ok = all(status != "failed" for _, status in results)
        names = ", ".join(name if status == "passed" else f"{name} [{status}]" for name, status in results)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({names})")


@pytest.fixture(scope="session")
def natural_corpus():
    """A natural-language token stream of at least 10^6 tokens.

    ``LANGSCALE_CORPUS`` may point at a plain token file (for example a
    preprocessed WikiText-2 training set); otherwise the bundled
    Shakespeare corpus is used.
    """
    path = os.environ.get("LANGSCALE_CORPUS")
    if path:
        return read_tokens(path)
    with gzip.open(SHAKESPEARE, "rb") as f:
        return tokenize(f.read())
