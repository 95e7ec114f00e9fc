import importlib.resources
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fomdp.domain_io import generate_colored_bw, load_domain  # noqa: E402


@pytest.fixture(scope="session")
def pickup_domain():
    return load_domain(importlib.resources.files("fomdp") / "data" / "pickup.fcd")


@pytest.fixture(scope="session")
def bw2():
    return generate_colored_bw(2, 2, 0)


@pytest.fixture(scope="session")
def bw3():
    return generate_colored_bw(3, 2, 0)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Record (and print) one PASS/FAIL line for an acceptance criterion."""
    def record(criterion, passed, detail: str) -> bool:
        word = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        line = f"{word} criterion {criterion}: {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
