import functools

import numpy as np
import pytest

from kldsel.simulate import ExperimentConfig, run_experiment


@functools.lru_cache(maxsize=None)
def experiment(pi, n, reps, seed=2024, B=500):
    """Shared Monte Carlo runs; several tests and the acceptance suite read the same reports."""
    return run_experiment(ExperimentConfig(pi=pi, n=n, reps=reps, seed=seed, B=B))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
