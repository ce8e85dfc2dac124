import pytest

_KEY = pytest.StashKey[dict]()
N_CRITERIA = 10


def pytest_configure(config):
    config.stash[_KEY] = {}


@pytest.fixture
def criterion(request):
    """Record an acceptance result; the summary prints one line per criterion."""
    results = request.config.stash[_KEY]

    def record(number: int, passed: bool, detail: str) -> None:
        results[number] = (bool(passed), detail)
        assert passed, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL  no result recorded (not run or errored)")
