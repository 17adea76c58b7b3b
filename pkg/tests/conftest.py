"""Shared fixtures: a session cache of PDE runs and the acceptance summary."""

import time

import pytest

from mbl.harness import preset_config, run_experiment

_CRITERIA: list[str] = []


class RunCache:
    """Each (preset, overrides) run is computed once per session."""

    def __init__(self):
        self._runs = {}

    def get(self, preset, *overrides):
        key = (preset, overrides)
        if key not in self._runs:
            t0 = time.perf_counter()
            res = run_experiment(preset_config(preset, list(overrides)))
            self._runs[key] = (res, time.perf_counter() - t0)
        return self._runs[key]


@pytest.fixture(scope="session")
def runs():
    return RunCache()


@pytest.fixture
def criterion():
    """Record (and print) one pass/fail line for an acceptance criterion."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
