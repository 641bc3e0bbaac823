import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bandit_router.data import Dataset, RoutingRecord, make_arms  # noqa: E402
from bandit_router.pretrain import Projection  # noqa: E402
from bandit_router.synthetic import SyntheticWorld  # noqa: E402


def unit_rows(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_dataset():
    rng = np.random.default_rng(7)
    arms = make_arms(["small", "medium", "large"], [0, 1, 2])
    records = tuple(
        RoutingRecord(
            f"q{i}",
            rng.standard_normal(4),
            rng.uniform(size=3),
            np.array([1e-4, 5e-4, 2e-3]) * rng.uniform(0.5, 1.5, size=3),
            "t" if i % 2 else None,
        )
        for i in range(30)
    )
    return Dataset(records=records, arms=arms, d_e=4)


@pytest.fixture(scope="session")
def small_world():
    return SyntheticWorld(d_e=8, seed=3)


@pytest.fixture
def identity4():
    return Projection.identity(4)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> str:
    line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
