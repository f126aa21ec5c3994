import pytest

from bohmwork import Grid1D, OscillatorParams

_REPORT = []


def record(criterion: int, ok: bool, detail: str) -> str:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    _REPORT.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return OscillatorParams()


@pytest.fixture(scope="session")
def grid():
    return Grid1D(-12.0, 12.0, 2048)
