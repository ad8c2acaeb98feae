import pytest

from umzi_router.coincidence import DetectorModel, reference_detectors
from umzi_router.source import reference_source

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def source():
    return reference_source(pair_rate=2e6)


@pytest.fixture
def detectors():
    return reference_detectors()


@pytest.fixture
def ideal_detectors():
    return DetectorModel(1.0, 0.0, 0.0, "ideal_s"), DetectorModel(1.0, 0.0, 0.0, "ideal_i")


@pytest.fixture
def acceptance_report():
    def record(number: int, title: str, ok: bool, detail: str = ""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}  {detail}".rstrip())
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
