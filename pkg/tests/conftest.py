import re
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

_criteria: dict[int, dict] = {}


@pytest.fixture
def data_dir() -> Path:
    return DATA


def pytest_runtest_logreport(report):
    match = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not match:
        return
    if report.when == "call" or report.outcome != "passed":
        props = dict(report.user_properties)
        entry = _criteria.setdefault(int(match.group(1)), {"outcome": "passed"})
        if report.outcome != "passed":
            entry["outcome"] = report.outcome
        entry.update(props)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["outcome"] == "passed" else "FAIL"
        line = f"criterion {number}: {status}  {entry.get('title', '')}"
        if entry.get("detail"):
            line += f"  [{entry['detail']}]"
        terminalreporter.write_line(line)
