import os

import pytest

_verdicts: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance_dir(tmp_path_factory):
    """Sample cache for the acceptance runs; set RMT_ACCEPTANCE_DIR to keep it between sessions."""
    root = os.environ.get("RMT_ACCEPTANCE_DIR")
    if root:
        os.makedirs(root, exist_ok=True)
        from pathlib import Path

        return Path(root)
    return tmp_path_factory.mktemp("acceptance")


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = dict(report.user_properties).get("detail", "")
        if not report.passed and not detail:
            detail = (report.longreprtext.strip().splitlines() or [""])[-1]
        name = report.nodeid.split("::")[-1]
        _verdicts[name] = (report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, (ok, detail) in sorted(_verdicts.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
