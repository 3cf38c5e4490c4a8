def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One line per acceptance criterion at the end of every run."""
    outcomes = {}
    priority = {"failed": 3, "skipped": 2, "passed": 1}
    for status in ("passed", "skipped", "failed"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            if priority[status] > priority.get(outcomes.get(name), 0):
                outcomes[name] = status
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for name, status in sorted(outcomes.items()):
        terminalreporter.write_line(f"[{label[status]}] {name}")
