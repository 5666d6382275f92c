import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def reference_stats():
    return json.loads((FIXTURES / "reference_stats.json").read_text())


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's verdict for the terminal summary."""
    results = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, title, passed, detail=""):
        results.append((number, title, bool(passed), detail))
        print(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE_KEY, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(results, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title} {detail}".rstrip())
