"""Shared fixtures plus the acceptance-criteria summary hook."""

import numpy as np
import pytest

_CRITERIA = []


class _Recorder:
    @staticmethod
    def record(num: int, name: str, passed: bool, detail: str = ""):
        _CRITERIA.append((num, name, bool(passed), detail))


@pytest.fixture
def criteria():
    """Register one pass/fail line per acceptance criterion."""
    return _Recorder


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, passed, detail in sorted(_CRITERIA):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {num:2d}: {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20260813)


def make_panel(T=30, N=12, r=2, sigma=0.5, seed=0, missing=None):
    """Small noisy factor panel; ``missing`` is a list of (t, i) cells."""
    g = np.random.default_rng(seed)
    F = g.standard_normal((T, r))
    Lam = g.standard_normal((N, r))
    X = F @ Lam.T + sigma * g.standard_normal((T, N))
    mask = np.ones((T, N), dtype=bool)
    for t, i in missing or []:
        mask[t, i] = False
    from factorfill import PanelMatrix
    return PanelMatrix(np.where(mask, X, np.nan), mask)


def corner_missing(T, N, depth, width):
    """(t, i) cells for a plain rectangular south-east corner."""
    return [(t, i) for t in range(T - depth, T)
            for i in range(N - width, N)]


@pytest.fixture
def small_panel():
    return make_panel(T=40, N=15, r=2, sigma=0.3, seed=3,
                      missing=corner_missing(40, 15, 10, 4))
