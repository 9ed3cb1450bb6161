import numpy as np
import pytest

from orthoprecoding.frame import FrameConfig, default_pilot_pattern


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    # 8 subcarriers x 6 symbols, pilots at m = 1, 4 -> 8 x 4 data grid
    return FrameConfig(n_subcarriers=8, n_symbols=6, cp_length=2, n_pilot_symbols=2)


@pytest.fixture
def small_pattern(small_config):
    return default_pilot_pattern(small_config)


@pytest.fixture(scope="session")
def default_config():
    return FrameConfig()


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number, passed, detail):
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
