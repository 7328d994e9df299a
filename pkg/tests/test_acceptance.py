"""Acceptance criteria at full size.

Each test runs one preset from grcsim.harness and prints a PASS/FAIL line per
check. Run with ``pytest tests/test_acceptance.py -s`` to see them. The MST,
spanner and verification presets take several minutes on one core.
"""
import pytest

from grcsim.harness import ACCEPTANCE, PRESETS


def report(name, result):
    for label, ok, detail in result.checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {label} ({detail})")


@pytest.mark.parametrize("name", ACCEPTANCE)
def test_acceptance(name):
    result = PRESETS[name]()
    report(name, result)
    failed = [label for label, ok, _ in result.checks if not ok]
    assert not failed, failed
