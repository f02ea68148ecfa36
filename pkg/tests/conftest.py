import pytest

from hflc.biped import BipedParams, GaitConfig, generate_reference_gait

CRITERIA = {
    1: "rule economy (count-rules n=7 flat 2187, jellali 54; (n-1)*9 for n=2..12)",
    2: "analytic premise gradient vs finite differences, rel err <= 1e-4",
    3: "LSE on 3x3 grid fits affine targets, SSE <= 1e-8, normal-equation oracle",
    4: "forward kinematics vs trigonometric oracle to 1e-9, link lengths",
    5: "HFL3 held-out SSE <= 1e-3 at every size 10..120",
    6: "SSE(size 120) <= SSE(size 10) for every controller",
    7: "mirrored right-leg controllers reproduce mirrored outputs to 1e-9",
    8: "jellali m=7 approximation RMSE <= 0.05",
    9: "gait -> train -> curve -> surface, deterministic, < 5 min",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture(scope="session")
def default_gait():
    return generate_reference_gait(BipedParams(), GaitConfig())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_protocol(item, nextitem):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        _outcomes[item.nodeid] = [marker.args[0], None, ""]
    yield


def pytest_runtest_logreport(report):
    entry = _outcomes.get(report.nodeid)
    if entry is None:
        return
    for name, value in report.user_properties:
        if name == "measured":
            entry[2] = value
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            # a strict expected failure: the criterion is not met
            entry[1] = "FAIL" if report.skipped else "PASS"
        else:
            entry[1] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num, status, value in sorted(_outcomes.values()):
        line = f"criterion {num}: {status or 'NOT RUN'}  {CRITERIA.get(num, '')}"
        if value:
            line += f"  [{value}]"
        terminalreporter.write_line(line)
