import sys

sys.path.insert(0, str(__file__.rsplit("/", 1)[0]))

ACCEPTANCE_RESULTS: dict[str, bool] = {}


def record_acceptance(name: str, passed: bool = True) -> None:
    ACCEPTANCE_RESULTS[name] = passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'}")
