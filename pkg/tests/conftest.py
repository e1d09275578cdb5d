"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

import pytest

_OUTCOMES: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion identifier and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = marker.args
    entry = _OUTCOMES.setdefault(cid, {"title": title, "ok": True, "detail": ""})
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry["ok"] = False
    for key, value in item.user_properties:
        if key == "detail":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_OUTCOMES, key=lambda c: (int(c.rstrip("abcde")), c)):
        e = _OUTCOMES[cid]
        detail = f"  [{e['detail']}]" if e["detail"] else ""
        terminalreporter.write_line(f"{'PASS' if e['ok'] else 'FAIL'}  {cid:<3} {e['title']}{detail}")
