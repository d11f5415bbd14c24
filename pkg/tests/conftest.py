import numpy as np
import pytest

from rearrangement import GridFunction, make_domain


@pytest.fixture
def unit_square():
    return make_domain(bounds=[(0, 1), (0, 1)], h=1 / 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_grid(rng, size=16, n=2):
    d = make_domain(bounds=[(0.0, 1.0)] * n, h=1.0 / size)
    return GridFunction(d, rng.standard_normal(d.cell_count))


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, ok, detail):
    prev = ACCEPTANCE.get(criterion)
    if prev is not None:
        ok = ok and prev[0]
        detail = f"{prev[1]}; {detail}"
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
