import numpy as np
import pytest

from ckl.phases import phase


@pytest.fixture
def const():
    return phase("ConstCoeff", 3)


@pytest.fixture
def star():
    return phase("BourgainStar", 3)


@pytest.fixture
def counter():
    return phase("Counterexample", 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line: verdict(label, ok, detail) -> ok."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
