import acceptance_criteria


def pytest_terminal_summary(terminalreporter):
    results = acceptance_criteria.RESULTS
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(results):
        terminalreporter.write_line(f"CRITERION {i:2d}: {'PASS' if results[i] else 'FAIL'}")
