import numpy as np
import pytest

from otnbr.quantizer import design_lloyd_max


@pytest.fixture(scope="session")
def q1():
    return design_lloyd_max(1)


@pytest.fixture(scope="session")
def q2():
    return design_lloyd_max(2)


@pytest.fixture(scope="session")
def q3():
    return design_lloyd_max(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LOG: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; the caller then asserts."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LOG.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
