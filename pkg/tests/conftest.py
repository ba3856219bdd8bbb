"""Shared fixtures: radial references and converged solves, computed once per session."""
from __future__ import annotations

import numpy as np
import pytest

from starplanet.eos import PolytropicEos
from starplanet.lane_emden import solve_unit
from starplanet.minimizer import SolverConfig, minimize


@pytest.fixture(scope="session")
def eos2():
    return PolytropicEos(1.0, 2.0)


@pytest.fixture(scope="session")
def unit2(eos2):
    return solve_unit(eos2)


@pytest.fixture(scope="session")
def unit25():
    return solve_unit(PolytropicEos(1.0, 2.5))


_SOLVES: dict = {}


def solve(**kw):
    """Converged solve keyed by its configuration, shared across test modules."""
    key = tuple(sorted(kw.items()))
    if key not in _SOLVES:
        _SOLVES[key] = minimize(SolverConfig(**kw))
    return _SOLVES[key]


@pytest.fixture(scope="session")
def single2():
    return solve(J=0.0, gamma=2.0)


@pytest.fixture(scope="session")
def rot2_m02():
    return solve(J=0.5, m=0.2, gamma=2.0)


@pytest.fixture(scope="session")
def rot2_m01():
    return solve(J=0.5, m=0.1, gamma=2.0)


@pytest.fixture(scope="session")
def sweep25():
    return {m: solve(J=0.5, m=m, gamma=2.5) for m in (0.05, 0.1, 0.2)}


@pytest.fixture(scope="session")
def sweep2():
    return {m: solve(J=0.5, m=m, gamma=2.0) for m in (0.05, 0.1, 0.2)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
