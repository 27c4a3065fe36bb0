"""Acceptance criteria at the stated tolerances, one status line each.

Each test prints its line to the terminal (bypassing capture) so that
``pytest -v`` output lists the measured values next to the verdict.
"""

import pytest

from gapfield.acceptance import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda f: f.__name__)
def test_criterion(criterion, capsys):
    res = criterion()
    with capsys.disabled():
        print("\n" + res.line() + f" ({res.seconds:.1f} s)")
    assert res.passed, res.line()
