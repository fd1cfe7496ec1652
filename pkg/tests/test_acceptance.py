"""Acceptance suite: each criterion runs at its stated tolerance and prints one PASS/FAIL line."""

import pytest

from gmtlab.acceptance import CRITERIA, run_criterion

ACCEPTANCE_LINES = []


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1), ids=lambda n: f"criterion{n:02d}")
def test_criterion(number, capsys):
    res = run_criterion(number)
    ACCEPTANCE_LINES.append(res.line())
    with capsys.disabled():
        print("\n" + res.line(), flush=True)
    assert res.verdict, f"{res.line()}\n{res.metrics}"
