"""Shared fixtures and the acceptance summary printed at the end of a run."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("layerfem", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("layerfem")

# filled by tests/test_acceptance.py: (number, title, passed, detail)
RESULTS: list[tuple[int, str, bool, str]] = []


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    RESULTS.append((number, title, bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    by_number: dict[int, list] = {}
    for n, title, ok, detail in RESULTS:
        by_number.setdefault(n, []).append((title, ok, detail))
    for n in sorted(by_number):
        parts = by_number[n]
        ok = all(p[1] for p in parts)
        title = parts[0][0]
        detail = "; ".join(p[2] for p in parts)
        tr.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
