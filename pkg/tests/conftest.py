ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def record_criterion(num: int, name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[num] = (name, ok, detail)
    print(f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'} -- {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        name, ok, detail = ACCEPTANCE_RESULTS[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num} ({name}): {status} -- {detail}")
