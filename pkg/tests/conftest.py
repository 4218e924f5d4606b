import re

_CRITERIA = {
    1: "CRF oracle equivalence",
    2: "gradient checks",
    3: "normalization property",
    4: "softmax/CRF degeneracy",
    5: "overfit suite",
    6: "synthetic-language accuracy",
    7: "repetition harness",
    8: "pipeline conformance",
    9: "determinism and persistence",
    10: "reference pronunciation regression",
}
_outcomes: dict[int, list[bool]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not m:
        return
    failed = report.failed
    passed = report.when == "call" and report.passed
    if failed or passed:
        _outcomes.setdefault(int(m.group(1)), []).append(passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k, name in _CRITERIA.items():
        results = _outcomes.get(k)
        status = "NOT RUN" if results is None else ("PASS" if all(results) else "FAIL")
        terminalreporter.write_line(f"criterion {k:2d} {status:7s} {name}")
