from __future__ import annotations

import numpy as np
import pytest

from kmslab.graph import dumbbell, single_loop


@pytest.fixture
def db():
    return dumbbell(2, 3)


@pytest.fixture
def loop():
    return single_loop()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# one line per acceptance criterion, shown after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
