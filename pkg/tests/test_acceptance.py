"""Acceptance criteria, one test each; the PASS/FAIL lines are repeated in the run summary.

Criteria 5-8 run full seeded experiments (several minutes on one core).
"""
import pytest

from pwqas.acceptance import CRITERIA, evaluate

LINES: list[str] = []

LONG = {5, 6, 7, 8}


@pytest.mark.parametrize("number", [
    pytest.param(k, id=f"c{k}", marks=[pytest.mark.slow] if k in LONG else [])
    for k in sorted(CRITERIA)
])
def test_criterion(number):
    outcome = evaluate(number)
    LINES.append(outcome.line())
    print(outcome.line())
    assert outcome.passed, outcome.line()
