import pytest

from magweyl.field import FieldConfig

VERDICTS = []


@pytest.fixture
def cfg2():
    return FieldConfig.from_frequencies([1.0])


@pytest.fixture
def cfg3():
    return FieldConfig.from_frequencies([1.0], q=1)


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" -- {detail}" if detail else "")
        VERDICTS.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
