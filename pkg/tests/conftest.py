from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import _util  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if _util.ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_util.ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)
