import pytest

# one line per acceptance criterion, filled in by tests/test_acceptance.py
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, checks, elapsed: float | None = None,
               budget: float | None = None):
        checks = list(checks)
        if budget is not None:
            checks.append((f"runtime {elapsed:.1f}s < {budget:g}s", elapsed < budget))
        ok = all(p for _, p in checks)
        failed = [name for name, p in checks if not p]
        line = f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}: {title}"
        if failed:
            line += " | failing: " + "; ".join(failed)
        CRITERIA[number] = line
        print(line)
        return ok, failed

    return record
