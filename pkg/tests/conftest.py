import numpy as np
import pytest
from hypothesis import settings

from qchilbert.curves import three_disks, unit_disk

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def disk():
    return unit_disk()


@pytest.fixture(scope="session")
def trefoil():
    """The union of three unit disks centred at 0 and 1 +- i."""
    return three_disks()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_COUNT = 12


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict; the terminal summary lists all of them."""
    results = request.config.stash.setdefault(_RESULTS, {})

    def record(number, title, ok, detail):
        results[number] = (title, bool(ok), detail)
        print(f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
        return ok

    return record


_RESULTS = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, ACCEPTANCE_COUNT + 1):
        title, ok, detail = results.get(number, ("not run or errored", False, ""))
        terminalreporter.write_line(f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}: {title}"
                                    + (f" ({detail})" if detail else ""))
