"""The full acceptance suite, one test per criterion.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` and in
the terminal summary).  Criterion 5 runs the full density sweep and takes a
few minutes.
"""

import pytest

from commdensity import acceptance

_CTX = acceptance.Context()
_LINES = []


@pytest.fixture(scope="module", autouse=True)
def _report(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_sep("-", "acceptance criteria")
        for line in _LINES:
            reporter.write_line(line)


@pytest.mark.parametrize("fn", acceptance.CRITERIA, ids=[f.__name__ for f in acceptance.CRITERIA])
def test_criterion(fn):
    res = acceptance.run_criterion(fn, _CTX)
    line = res.line()
    _LINES.append(line)
    print(line)
    assert res.passed, line
