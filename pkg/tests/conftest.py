import cmath
import itertools

import numpy as np
import pytest

from vilenkin.group import GroupSpec

ACCEPTANCE_LINES: list[str] = []


def psi_oracle(spec, n, x_digits):
    """exp(2 pi i sum n_k x_k / m_k) straight from the definition."""
    nd = []
    for mk in spec.m:
        n, d = divmod(n, mk)
        nd.append(d)
    phase = sum(a * b / mk for a, b, mk in zip(nd, x_digits, spec.m))
    return cmath.exp(2j * cmath.pi * phase)


def all_points(spec):
    # rank order: first coordinate fastest
    for tup in itertools.product(*[range(mk) for mk in reversed(spec.m)]):
        yield tuple(reversed(tup))


@pytest.fixture
def spec36():
    return GroupSpec((2, 3, 2, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
