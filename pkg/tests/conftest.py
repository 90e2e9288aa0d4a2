import functools

import pytest

from ptbreathers.continuation import solve_breather
from ptbreathers.model import ModelParams


@functools.lru_cache(maxsize=None)
def _breather(branch, gamma, omega, eps, E, half_width):
    return solve_breather(branch, ModelParams(gamma, omega, eps, E), half_width)


@pytest.fixture(scope="session")
def breather():
    """Cached breather lookup: breather(branch, gamma, omega, eps, E, half_width=20)."""

    def get(branch, gamma, omega, eps, E, half_width=20):
        return _breather(branch, float(gamma), float(omega), float(eps), float(E), half_width)

    return get


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        request.config._acceptance_lines.append((number, line))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
