import math

import pytest

from isoradial.lattice import generate, superpose

# pass/fail lines of the acceptance suite, printed in the terminal summary
ACCEPTANCE = {}


def record(criterion, part, ok, detail):
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
    print(f"criterion {criterion}{part}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{p[0] or 'all'}: {'pass' if p[1] else 'FAIL'} ({p[2]})" for p in parts)
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def square():
    return generate("square")


@pytest.fixture(scope="session")
def honeycomb():
    return generate("honeycomb")


@pytest.fixture(scope="session")
def triangular():
    return generate("triangular")


@pytest.fixture(scope="session")
def deformed():
    return generate("deformed_square", math.pi / 6)


@pytest.fixture(scope="session")
def square_sup(square):
    return superpose(square)


@pytest.fixture(scope="session")
def triangular_sup(triangular):
    return superpose(triangular)


def first_white(g):
    return next((t, 0, 0) for t in range(g.n_vertices) if g.colors[t] == "W")


def first_black(g):
    return next((t, 0, 0) for t in range(g.n_vertices) if g.colors[t] == "B")
