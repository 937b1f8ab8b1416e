import numpy as np
import pytest

from swidel.model import DelaySet, DepController, IndepController, Plant


def random_delays(rng, d_max):
    """A random delay set with maximum ``d_max``."""
    others = [d for d in range(d_max) if rng.random() < 0.5]
    return DelaySet(tuple(sorted(set(others + [d_max]))))


def random_plant(rng, n=None, m=None):
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 3))
    return Plant(rng.normal(size=(n, n)), rng.normal(size=(n, m)))


def random_dep_instance(rng, max_delay=3):
    plant = random_plant(rng)
    D = random_delays(rng, int(rng.integers(0, max_delay + 1)))
    width = plant.n + D.d_max * plant.m
    ctrl = DepController({d: 0.5 * rng.normal(size=(plant.m, width)) for d in D})
    return plant, D, ctrl


def random_indep_instance(rng, max_delay=3):
    plant = random_plant(rng)
    D = random_delays(rng, int(rng.integers(0, max_delay + 1)))
    ctrl = IndepController(0.5 * rng.normal(size=(plant.m, plant.n + D.d_max * plant.m)))
    return plant, D, ctrl


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
