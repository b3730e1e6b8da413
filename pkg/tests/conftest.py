import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    status = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m:
                continue
            key = (int(m.group(1)), m.group(2).replace("_", " "))
            ok = outcome == "passed"
            status[key] = status.get(key, True) and ok
    if not status:
        return
    terminalreporter.section("acceptance criteria")
    for (n, name), ok in sorted(status.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {name}")
