"""Shared pytest setup: collects acceptance checks and prints a PASS/FAIL line per criterion."""

from collections import defaultdict

import pytest

ACCEPTANCE_TITLES = {
    1: "Husimi Hamiltonian from the BCH similarity transform",
    2: "cross term vanishes at the Q-function parameter",
    3: "extended Hamiltonian builders agree",
    4: "extended canonical transformation preserves commutators",
    5: "operator-series Husimi matches the convolution",
    6: "Husimi non-negative, Wigner negative",
    7: "modified Hamilton-Jacobi residual",
    8: "Q-representation classical transport",
    9: "EPS equation residual",
    10: "averaging rule",
}

_results = defaultdict(list)


class Recorder:
    def __init__(self, criterion):
        self.criterion = criterion

    def __call__(self, name, ok, detail=""):
        _results[self.criterion].append((name, bool(ok), detail))
        return bool(ok)


@pytest.fixture
def acceptance(request):
    """``acceptance(name, ok, detail)`` records a sub-check for the test's criterion marker."""
    marker = request.node.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        raise pytest.UsageError("acceptance tests need @pytest.mark.acceptance(<criterion>)")
    return Recorder(marker.args[0])


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid, title in ACCEPTANCE_TITLES.items():
        checks = _results.get(cid)
        if not checks:
            tr.write_line(f"FAIL  {cid:>2}  {title}  (not run)")
            continue
        ok = all(c[1] for c in checks)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {cid:>2}  {title}")
        for name, good, detail in checks:
            tr.write_line(f"          {'ok ' if good else 'BAD'} {name}: {detail}")
