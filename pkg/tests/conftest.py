import collections

import pytest

# criterion number -> list of (clause, passed)
CRITERIA: dict[int, list] = collections.defaultdict(list)


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance clause.

    Usage: ``criterion(n, "clause")`` inside the test; the clause counts as
    passed only if the test body finishes without raising.
    """
    entries = []

    def mark(n: int, clause: str):
        entries.append((n, clause))

    yield mark
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    for n, clause in entries:
        CRITERIA[n].append((clause, ok))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        clauses = CRITERIA[n]
        ok = all(p for _, p in clauses)
        failed = [c for c, p in clauses if not p]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += "  (failed: " + "; ".join(failed) + ")"
        terminalreporter.write_line(line)
