import numpy as np
import pytest

from aoipareto.channel import ChannelStats

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def random_stats(rng, N, K, T, g_range=(-12, -9), kappa_range=(0.5, 30.0), bandwidth=1e5, noise_w=1e-14):
    """Random radio-map statistics with log-uniform gains."""
    return ChannelStats(
        g=10 ** rng.uniform(*g_range, (N, K, T)),
        kappa=rng.uniform(*kappa_range, (N, K, T)),
        bandwidth=bandwidth,
        noise_w=noise_w,
    )


@pytest.fixture
def record():
    """Log an acceptance verdict; all verdicts are printed at the end of the session."""

    def _record(label: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((label, bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
