"""Shared fixtures and the acceptance-criterion report."""

from __future__ import annotations

import random

import pytest

from graphsumm.graph import InputGraph

# criterion id -> (passed, detail); filled by test_acceptance.py
CRITERIA: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    CRITERIA[criterion] = (bool(passed), detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale acceptance runs (minutes)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA):
        passed, detail = CRITERIA[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if passed else 'FAIL'} - {detail}")


def random_graph(rng: random.Random, n: int, p: float) -> InputGraph:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return InputGraph(n, edges)


def random_assignment(rng: random.Random, n: int, k: int) -> list[int]:
    return [rng.randrange(k) for _ in range(n)]


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture
def path3():
    # path 1-2-3 relabeled 0-1-2
    return InputGraph(3, [(0, 1), (1, 2)])


@pytest.fixture
def triangle():
    return InputGraph(3, [(0, 1), (1, 2), (0, 2)])
