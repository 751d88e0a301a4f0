import numpy as np
import pytest

from levyexpint.rng import RngStream

U_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


@pytest.fixture
def stream():
    return RngStream(20241016, 0)


def lt_within(samples, u, expected, k=4.0):
    """|empirical LT - expected| <= k * stderr at a single u."""
    z = np.exp(-u * np.asarray(samples, float))
    se = z.std(ddof=1) / np.sqrt(z.size)
    # 1e-12 absorbs rounding for degenerate laws (stderr 0)
    return abs(z.mean() - expected) <= k * se + 1e-12, z.mean(), se


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
