"""Terminal summary: one line per acceptance criterion.

Acceptance tests are named test_c<N>_*; every test sharing a number
covers one criterion, and the criterion passes only if all of them do.
"""

import re

_LABELS = {
    1: "value-map rewrites on a mixed collection",
    2: "pattern-driven field moves",
    3: "lookup staging with originals kept",
    4: "halting and fall-through against a naive reference",
    5: "no-logic identity round-trips per source type",
    6: "per-handle rule suites",
    7: "run report counts and layout",
    8: "audit replay fidelity",
    9: "throughput and flat streaming memory",
}

_NODE = re.compile(r"test_acceptance\.py::test_c(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results: dict[int, bool] = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = _NODE.search(getattr(rep, "nodeid", "") or "")
            if m is None:
                continue
            n = int(m.group(1))
            results[n] = results.get(n, True) and key == "passed"
    if not results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for n in sorted(results):
        verdict = "PASS" if results[n] else "FAIL"
        terminalreporter.write_line(
            "  %d. %s: %s" % (n, _LABELS.get(n, "criterion"), verdict)
        )
