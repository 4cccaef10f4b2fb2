import sys

import numpy as np
import pytest

from drso.core import AmbiguityBall, CentralDistribution, ScenarioMetric
from drso.problems import FAMILIES, generate, random_center


def ball_of(p, r, metric=None, kind="wasserstein"):
    return AmbiguityBall(CentralDistribution.from_explicit(p), r, kind, metric or ScenarioMetric.discrete())


def metric_for(problem, kind):
    if kind == "discrete":
        return ScenarioMetric.discrete()
    if problem.family == "facility_location":
        return problem.client_metric()
    return problem.terminal_metric()


def random_cases(n, seed=0, families=FAMILIES):
    """(family, problem, center, r) tuples drawn deterministically."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        fam = families[i % len(families)]
        problem = generate(fam, int(rng.integers(0, 10**6)))
        p = random_center(problem, int(rng.integers(0, 10**6)))
        r = float(rng.choice([0.0, 0.1, 0.25, 0.5, 1.0]))
        out.append((fam, problem, p, r))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
