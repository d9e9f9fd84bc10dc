import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cel.nn_core import init_parameters

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def random_model(rng, hidden_dim, input_dim, scale=0.5):
    params = init_parameters(hidden_dim, input_dim, 0)
    params.data[:] = rng.normal(0.0, scale, params.size)
    return params


def random_batch(rng, batch, steps, input_dim):
    return rng.normal(size=(batch, steps, input_dim)), rng.normal(size=batch)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_problem(rng):
    params = random_model(rng, 2, 3)
    return params, random_batch(rng, 4, 3, 3)
