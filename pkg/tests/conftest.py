import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from anisohardy import dilation, varexp

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.register_profile("thorough", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")

STANDARD_MATRICES = {
    "iso2": np.array([[2.0, 0.0], [0.0, 2.0]]),
    "diag23": np.array([[2.0, 0.0], [0.0, 3.0]]),
    "rot": np.array([[0.0, -2.0], [1.0, 0.0]]),
}


def expansive_matrix(rng, n=2, low=1.05, high=3.0):
    """Random expansive matrix with eigenvalue moduli in (low, high)."""
    while True:
        V = rng.normal(size=(n, n))
        if np.linalg.cond(V) < 20:
            break
    if n >= 2 and rng.random() < 0.5:
        mod = rng.uniform(low, high)
        th = rng.uniform(0.2, np.pi - 0.2)
        block = mod * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        D = np.eye(n)
        D[:2, :2] = block
        if n == 3:
            D[2, 2] = rng.uniform(low, high) * rng.choice([-1, 1])
    else:
        D = np.diag(rng.uniform(low, high, n) * rng.choice([-1, 1], n))
    return V @ D @ np.linalg.inv(V)


@st.composite
def expansive(draw, n=2):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return expansive_matrix(np.random.default_rng(seed), n)


@pytest.fixture(scope="session")
def iso2():
    return dilation.make_dilation(STANDARD_MATRICES["iso2"])


@pytest.fixture(scope="session")
def diag23():
    return dilation.make_dilation(STANDARD_MATRICES["diag23"])


@pytest.fixture(scope="session")
def rot():
    return dilation.make_dilation(STANDARD_MATRICES["rot"])


@pytest.fixture(scope="session")
def line2():
    return dilation.make_dilation(np.array([[2.0]]))


@pytest.fixture(scope="session")
def half():
    return varexp.constant(0.5)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    def record(number, title, ok, detail):
        line = f"[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
