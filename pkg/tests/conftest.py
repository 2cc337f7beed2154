import pytest

from fractsob.geometry import make_sg, make_vicsek


@pytest.fixture(scope="session")
def sg():
    return make_sg()


@pytest.fixture(scope="session")
def v12():
    return make_vicsek(1, 2)


@pytest.fixture
def record_criterion(request):
    """Store one acceptance line; printed in the terminal summary."""
    store = request.config.stash.setdefault(_KEY, {})

    def record(number: int, passed: bool, detail: str):
        store[number] = (passed, detail)
        print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


_KEY = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        passed, detail = store[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
