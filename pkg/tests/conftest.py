"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

from collections import defaultdict

import pytest

TITLES = {
    1: "closed-form optima",
    2: "beach, five-step learning curves",
    3: "beach, episode-length sweep",
    4: "traffic lanes, 500 drivers",
    5: "traffic accident recovery",
    6: "traffic with 25% non-compliant drivers",
    7: "beach scalability, 1000 agents",
    8: "property suites",
}

_outcomes: dict[int, list[tuple[str, str]]] = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[marker.args[0]].append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        results = _outcomes[number]
        failed = [name for name, outcome in results if outcome != "passed"]
        status = "FAIL" if failed else "PASS"
        line = f"{status} criterion {number} ({TITLES.get(number, '')}): {len(results) - len(failed)}/{len(results)} checks"
        if failed:
            line += " - failing: " + ", ".join(failed)
        terminalreporter.write_line(line)
