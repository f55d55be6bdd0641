import pytest

from sqtransfer import HilbertSpec

# Acceptance tests append (number, passed, detail) here; printed at the end of the run.
ACCEPTANCE_RESULTS = []


@pytest.fixture
def small_spec():
    return HilbertSpec(cavity_dim=3, mech_dim=3)


@pytest.fixture
def record_criterion():
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_RESULTS.append((number, passed, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(ACCEPTANCE_RESULTS, key=lambda r: str(r[0])):
        terminalreporter.write_line(line)
