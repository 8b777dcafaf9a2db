import pytest

# (number, description, passed, detail) recorded by the acceptance module
CRITERIA = []


def record(number, description, passed, detail=""):
    CRITERIA.append((number, description, bool(passed), detail))
    print(criterion_line(number, description, passed, detail))


def criterion_line(number, description, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    return f"[{status}] criterion {number}: {description}" + (f" ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, passed, detail in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(criterion_line(number, description, passed, detail))


@pytest.fixture
def criterion():
    return record
