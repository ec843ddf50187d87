import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion after the test run."""
    mod = (sys.modules.get("test_acceptance")
           or sys.modules.get("tests.test_acceptance"))
    if mod is None:
        return
    criteria = getattr(mod, "CRITERIA", None)
    results = getattr(mod, "RESULTS", None)
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(criteria):
        outcome = results.get(num)
        if outcome is None:
            status = "NOT RUN"
        else:
            status = "PASS" if outcome[0] else "FAIL"
        line = f"criterion {num:2d}  {status:7s} {criteria[num]}"
        if outcome is not None and outcome[1]:
            line += f"  [{outcome[1]}]"
        terminalreporter.write_line(line)
