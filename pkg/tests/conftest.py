import numpy as np
import pytest

from holodyn.catalog import chebyshev_map, power_map


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def z2():
    return power_map(2)


@pytest.fixture
def t2():
    return chebyshev_map(2)


ACCEPTANCE_KEY = pytest.StashKey[dict]()
N_CRITERIA = 13


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, ok, detail)``; the summary prints one line per criterion."""
    store = request.config.stash[ACCEPTANCE_KEY]
    n = int(request.node.name.split("_")[2])
    store.setdefault(n, None)

    def record(n, ok, detail):
        store[n] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n not in store:
            terminalreporter.write_line(f"criterion {n:2d}: not run")
        elif store[n] is None:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL  no result recorded (see traceback)")
        else:
            ok, detail = store[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
