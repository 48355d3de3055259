import numpy as np
import pytest

from accretiv.grid import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def square():
    return GridSpec.box([1.0, 1.0], 8)


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``criterion(k, ok, detail)`` records one line for the terminal summary."""
    lines = request.config.stash.setdefault(_CRITERIA, {})

    def record(k, ok, detail):
        lines[k] = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(lines[k])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
