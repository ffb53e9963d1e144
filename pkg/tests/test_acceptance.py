"""Acceptance gate: each criterion at its stated tolerance, one line apiece."""

import pytest

from tenkit.acceptance import CRITERIA

RESULTS: list = []


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = CRITERIA[number]()
    line = res.line()
    RESULTS.append(line)
    print(line)
    assert res.passed, line
