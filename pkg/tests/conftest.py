import pytest

_criteria = pytest.StashKey[dict]()


def pytest_addoption(parser):
    parser.addoption("--run-extended", action="store_true", default=False,
                     help="run full-budget experiments (minutes per repetition)")


def pytest_configure(config):
    config.stash[_criteria] = {}


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-extended"):
        return
    skip = pytest.mark.skip(reason="full-budget run; enable with --run-extended")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.skipped and not report.failed):
        return
    number, title = marker.args
    entry = item.config.stash[_criteria].setdefault(number, {"title": title, "parts": {}})
    if report.skipped:
        reason = report.longrepr[-1] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        entry["parts"][item.name] = ("NOT RUN", reason.removeprefix("Skipped: "))
    else:
        details = "; ".join(v for k, v in item.user_properties if k == "measured")
        entry["parts"][item.name] = ("PASS" if report.passed else "FAIL", details)


def pytest_terminal_summary(terminalreporter, config):
    criteria = config.stash[_criteria]
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        entry = criteria[number]
        states = [s for s, _ in entry["parts"].values()]
        if "FAIL" in states:
            verdict = "FAIL"
        elif "PASS" in states:
            verdict = "PASS" if "NOT RUN" not in states else "PASS (partly not run)"
        else:
            verdict = "NOT RUN"
        notes = " | ".join(f"{name}: {detail}" for name, (_, detail) in entry["parts"].items() if detail)
        terminalreporter.write_line(f"criterion {number:>2} {verdict:<21} {entry['title']} -- {notes}")
