import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trafficimg import _corpus  # noqa: E402
from trafficimg.generator import build_class_profile  # noqa: E402


@pytest.fixture(scope="session")
def small_corpus():
    return _corpus.corpus(n_per_class=12, seed=1)


@pytest.fixture(scope="session")
def profiles(small_corpus):
    return {label: build_class_profile(flows, label) for label, flows in small_corpus.items()}


@pytest.fixture(scope="session")
def amazon():
    return _corpus.reference_flow()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
