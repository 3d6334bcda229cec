import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import example1  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "demos" / "data"


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def data_dir():
    return DATA


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
