import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test still fails through its own assert."""
    results = request.config.stash[_RESULTS]

    def record(number, ok, detail):
        line = f"criterion {number!s:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        results[str(number)] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if results:
        terminalreporter.section("acceptance")
        for number in sorted(results, key=lambda n: (int(n.rstrip("abc")), n)):
            terminalreporter.write_line(results[number])
