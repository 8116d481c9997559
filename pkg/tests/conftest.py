import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns the verdict so the test can assert it."""

    def record(cid: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append((cid, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} [{cid}] {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in sorted(_ACCEPTANCE, key=lambda t: _order(t[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{cid}] {detail}")
    passed = sum(ok for _, ok, _ in _ACCEPTANCE)
    terminalreporter.write_line(f"{passed}/{len(_ACCEPTANCE)} acceptance lines pass")


def _order(cid: str):
    head = "".join(ch for ch in cid if ch.isdigit())
    return int(head or 0), cid
