import sys
from pathlib import Path

import pytest

from citelens.corpus import ingest_files, month_index

FIXTURES = Path(__file__).parent / "fixtures"
G1_DIR = FIXTURES / "g1"
# B is published in 2000-01; every G1 month below is relative to it
B0 = month_index(2000, 1)
G1_HORIZON = B0 + 48

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def g1():
    return ingest_files(G1_DIR / "documents.csv", G1_DIR / "citations.csv", horizon=G1_HORIZON)


@pytest.fixture
def g1_default_horizon():
    return ingest_files(G1_DIR / "documents.csv", G1_DIR / "citations.csv")


# criterion number -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
