"""Shared fixtures and the per-criterion acceptance summary."""

import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)")
_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: numbered acceptance criterion")


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    cid = int(m.group(1))
    entry = _results.setdefault(cid, {"ok": True, "details": []})
    if report.failed or report.skipped:
        entry["ok"] = False
    for key, value in report.user_properties:
        if key == "detail" and report.when == "call":
            entry["details"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_results):
        entry = _results[cid]
        status = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(entry["details"])
        tr.write_line(f"criterion {cid:2d}: {status}  {detail}")


@pytest.fixture
def detail(record_property):
    """Attach a one-line measurement to the acceptance summary."""

    def add(text):
        record_property("detail", text)

    return add
