import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from evrecover.events import EventStream  # noqa: E402


def random_stream(rng, width=4, height=3, n=40, t_start=0.0, duration=1.0):
    return EventStream.from_arrays(
        rng.uniform(t_start, t_start + duration, n), rng.integers(0, width, n),
        rng.integers(0, height, n), rng.choice([-1, 1], n), width, height, (t_start, duration))


@pytest.fixture
def rng():
    return np.random.default_rng(20201014)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE[number] = (title, bool(ok), detail)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
