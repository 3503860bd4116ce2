import sys

import numpy as np
import pytest

from bergwehrl.space import SpaceParams


@pytest.fixture
def p12():
    return SpaceParams(1, 2.0)


@pytest.fixture
def p23():
    return SpaceParams(2, 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_ball_point(rng, n, rmax=0.95):
    d = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return rmax * rng.uniform() ** (1 / (2 * n)) * d / np.linalg.norm(d)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {detail}")
