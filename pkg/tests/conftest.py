import pytest

CRITERIA = {
    1: "initial curvature matches the closed form",
    2: "expander profiles keep r, w and r' positive",
    3: "single inflection, r''' < 0 there, stable under refinement",
    4: "slope-limit bracket nonnegative, finite and nested",
    5: "Picard contraction ratio and agreement with the RK start",
    6: "slope sign follows the regime",
    7: "structural bounds on w and r'",
    8: "soliton identity residual",
    9: "critical cylinder stays put",
    10: "fifth-order convergence",
    11: "byte-identical repeated CLI runs",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    k = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("measured", "")
        prev = _outcomes.get(k, (True, []))
        _outcomes[k] = (prev[0] and rep.passed, prev[1] + ([detail] if detail else []))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        if k not in _outcomes:
            terminalreporter.write_line(f"criterion {k:2d} NOT RUN  {CRITERIA[k]}")
            continue
        ok, details = _outcomes[k]
        extra = f"  [{'; '.join(details)}]" if details else ""
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {CRITERIA[k]}{extra}")
