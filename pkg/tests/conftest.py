import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> {"title", "outcomes", "details"}
_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.fixture
def report(request):
    """Attach a one-line detail string to the current acceptance criterion."""
    marker = request.node.get_closest_marker("acceptance")

    def add(text):
        if marker is not None:
            entry = _ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1],
                                                            "outcomes": [], "details": []})
            entry["details"].append(text)
        print(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry = _ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1],
                                                        "outcomes": [], "details": []})
        entry["outcomes"].append("skip" if rep.skipped else rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[num]
        outs = entry["outcomes"]
        if outs and all(o is True for o in outs):
            status = "PASS"
        elif any(o is False for o in outs):
            status = "FAIL"
        else:
            status = "NOT RUN"
        detail = "; ".join(entry["details"])
        tr.write_line(f"criterion {num:>2} {status:<7} {entry['title']}: {detail}")
