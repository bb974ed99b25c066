import pytest


def pytest_configure(config):
    config._criteria = []


@pytest.fixture()
def criterion(request):
    """Record one acceptance verdict; printed immediately and again in the terminal summary."""
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        print(line)
        request.config._criteria.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter, config):
    if config._criteria:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config._criteria, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
