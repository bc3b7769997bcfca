import pytest

from xdpre.groups import CURVE, DebugBackend

BACKENDS = {"debug": DebugBackend(), "curve": CURVE}


@pytest.fixture
def debug():
    return DebugBackend()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


# -- one pass/fail line per acceptance criterion ---------------------------------------

_CRITERIA: dict[int, list[bool]] = {}
_TITLES: dict[int, str] = {}


def _criterion(item_name: str):
    # test_c07_cost_ordering[...] -> (7, "cost ordering")
    if not item_name.startswith("test_c"):
        return None
    head = item_name.split("[")[0][len("test_c"):]
    num, _, rest = head.partition("_")
    return (int(num), rest.replace("_", " ")) if num.isdigit() else None


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    found = _criterion(report.nodeid.split("::")[-1])
    if found is None:
        return
    num, title = found
    _TITLES[num] = title
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA.setdefault(num, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        verdict = "PASS" if all(_CRITERIA[num]) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {verdict}  {_TITLES[num]}")
