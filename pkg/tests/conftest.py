import numpy as np
import pytest

from logbandits.env import RewardEnv
from logbandits.harness.generators import gen_fig1_benchmark
from logbandits.pure_explore import passive_baseline, rage_glm, rage_glm_r

FIG1_SEEDS = range(10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def fig1():
    return gen_fig1_benchmark(10)


@pytest.fixture(scope="session")
def fig1_runs(fig1):
    """RAGE-GLM ("rage") and RAGE-GLM-R ("r") on the d=10 benchmark, 10 seeds."""
    out = {}
    for name, fn in (("rage", rage_glm), ("r", rage_glm_r)):
        out[name] = [fn(fig1, 0.05, 0.5, fig1.kappa0, RewardEnv(fig1.theta_star, s))
                     for s in FIG1_SEEDS]
    return out


@pytest.fixture(scope="session")
def fig1_passive(fig1):
    return [passive_baseline(fig1, 0.05, 0.5, fig1.kappa0, RewardEnv(fig1.theta_star, s))
            for s in FIG1_SEEDS]


def pytest_terminal_summary(terminalreporter):
    from _helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
