import itertools
import zlib
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drso.core import (
    AmbiguityBall,
    CallableSampler,
    CentralDistribution,
    ExplicitDistribution,
    IndependentSampler,
    ScenarioMetric,
    ScenarioSpace,
    empirical_estimate,
    mask_of,
    members,
    split_seed,
    uniforms,
    wasserstein_distance,
)
from drso.errors import AnchorMissing, InfeasibleMarginals, TooLarge
from drso.problems import FAMILIES, fl2, generate, steiner_path, vc3

LINE = np.abs(np.array([0.0, 5.0, 10.0])[:, None] - np.array([0.0, 5.0, 10.0])[None, :])


def test_mask_roundtrip():
    assert mask_of([0, 2]) == 5
    assert members(5) == (0, 2)
    assert members(0) == ()


def test_space_counts():
    assert ScenarioSpace(3).count() == 8
    assert ScenarioSpace(4, 2).count() == 1 + 4 + 6
    assert all(bin(A).count("1") <= 2 for A in ScenarioSpace(4, 2).enumerate())
    with pytest.raises(TooLarge):
        ScenarioSpace(12).enumerate(guard=100)


def test_discrete_metric_examples():
    d = ScenarioMetric.discrete()
    assert d.distance(1, 1) == 0
    assert d.distance(1, 3) == 1


def test_asym_line_example():
    d = ScenarioMetric.asym_inf(LINE)
    assert d.distance(mask_of([0]), mask_of([0, 2])) == 10
    assert d.distance(mask_of([0, 2]), mask_of([0])) == 0
    assert d.distance(mask_of([0]), mask_of([1])) == 5


def test_asym_from_empty_needs_anchor():
    d = ScenarioMetric.asym_inf(LINE)
    with pytest.raises(AnchorMissing):
        d.distance(0, 1)
    assert d.distance(1, 0) == 0
    anchored = ScenarioMetric.asym_inf(LINE, anchor=[1.0, 4.0, 9.0])
    assert anchored.distance(0, mask_of([1, 2])) == 9.0
    assert anchored.distance(mask_of([2]), mask_of([0])) == 1.0


def test_rejects_bad_distance_matrix():
    with pytest.raises(ValueError):
        ScenarioMetric.asym_inf([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(ValueError):
        ScenarioMetric("nope")


def _asym_metrics():
    out = []
    for seed in range(6):
        pts = np.random.default_rng(seed).integers(0, 10, size=(4, 2))
        D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        out.append(ScenarioMetric.asym_inf(D, anchor=D[0] + 1))
    return out


def test_metric_axioms():
    # sigma(A, A) = 0, nonnegative, triangle inequality over all triples
    for d in [ScenarioMetric.discrete()] + _asym_metrics():
        scen = range(16)
        for A in scen:
            assert d.distance(A, A) == 0
        for A, B, C in itertools.product(scen, repeat=3):
            assert d.distance(A, C) <= d.distance(A, B) + d.distance(B, C) + 1e-9


def test_asym_subset_is_free():
    for d in _asym_metrics():
        for A in range(16):
            for B in range(16):
                if B & ~A == 0:
                    assert d.distance(A, B) == 0


def test_wasserstein_examples():
    disc = ScenarioMetric.discrete()
    p = ExplicitDistribution((1, 2), (Fraction(1, 2), Fraction(1, 2)))
    q = ExplicitDistribution((1, 2), (Fraction(1, 4), Fraction(3, 4)))
    assert wasserstein_distance(p, p, disc) == pytest.approx(0)
    assert wasserstein_distance(p, q, disc) == pytest.approx(0.25)
    asym = ScenarioMetric.asym_inf(LINE)
    a = ExplicitDistribution.point(mask_of([0]))
    b = ExplicitDistribution.point(mask_of([0, 2]))
    assert wasserstein_distance(a, b, asym) == pytest.approx(10)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=4, max_size=4), st.lists(st.integers(0, 9), min_size=4, max_size=4))
def test_discrete_wasserstein_is_half_l1(a, b):
    if sum(b) == 0:
        b = [1, 0, 0, 0]
    p = ExplicitDistribution((0, 1, 2, 3), tuple(Fraction(v, sum(a)) for v in a))
    q = ExplicitDistribution((0, 1, 2, 3), tuple(Fraction(v, sum(b)) for v in b))
    half_l1 = 0.5 * sum(abs(p.prob(s) - q.prob(s)) for s in range(4))
    assert wasserstein_distance(p, q, ScenarioMetric.discrete()) == pytest.approx(half_l1, abs=1e-9)


def test_distribution_validation():
    with pytest.raises(InfeasibleMarginals):
        ExplicitDistribution((1, 2), (0.5, 0.6))
    with pytest.raises(InfeasibleMarginals):
        ExplicitDistribution((1, 2), (1.5, -0.5))
    d = ExplicitDistribution((3, 1, 3), (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)))
    assert d.support == (1, 3)
    assert d.probs == (Fraction(1, 2), Fraction(1, 2))


def test_split_seed_is_deterministic_and_spread():
    assert split_seed(7, 1, 2) == split_seed(7, 1, 2)
    seeds = {split_seed(7, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert split_seed(7, 1) != split_seed(8, 1)


def test_uniforms_are_order_free():
    full = uniforms(3, 0, 100)
    assert np.array_equal(full[40:60], uniforms(3, 40, 20))
    assert 0 <= full.min() and full.max() < 1


def test_degenerate_sampler():
    c = CentralDistribution(CallableSampler(lambda seed, i: 5))
    est = empirical_estimate(c, 7, 0)
    assert est.as_dict() == {5: 1}


def test_small_sample_granularity():
    c = CentralDistribution.from_explicit(ExplicitDistribution((1, 2), (Fraction(1, 2), Fraction(1, 2))))
    for seed in range(20):
        est = empirical_estimate(c, 2, seed)
        assert sum(est.probs) == 1
        assert all(float(w) in (0.0, 0.5, 1.0) for w in est.probs)


def test_empirical_concentration():
    # 10^4 draws of a fair coin land within 0.05 of 1/2 for >= 99 of 100 seeds
    c = CentralDistribution.from_explicit(ExplicitDistribution((1, 2), (Fraction(1, 2), Fraction(1, 2))))
    good = sum(abs(empirical_estimate(c, 10_000, s).prob(1) - 0.5) <= 0.05 for s in range(100))
    assert good >= 99


def test_independent_sampler_matches_marginals():
    s = IndependentSampler([0.2, 0.7, 0.5])
    draws = s.draw(11, 0, 20000)
    for j, pj in enumerate([0.2, 0.7, 0.5]):
        freq = np.mean([d >> j & 1 for d in draws])
        assert abs(freq - pj) < 0.02
    exp = s.explicit()
    assert float(sum(exp.probs)) == pytest.approx(1.0)
    assert exp.prob(mask_of([1])) == pytest.approx(0.8 * 0.7 * 0.5)


def test_ball_defaults():
    c = CentralDistribution.from_explicit(ExplicitDistribution.point(1))
    assert AmbiguityBall(c, 0.3).metric.kind == "discrete"
    assert AmbiguityBall(c, 4.0, "linf").r == 1.0
    with pytest.raises(ValueError):
        AmbiguityBall(c, -1)


@pytest.mark.parametrize("family", FAMILIES)
def test_problem_properties(family):
    """g(.,A) >= 0, g(0,{}) = 0, inflation, convexity in x and subgradient on random probes."""
    rng = np.random.default_rng(zlib.crc32(family.encode()))
    for seed in range(4):
        prob = generate(family, seed)
        scen = prob.space.enumerate()
        assert prob.g(np.zeros(prob.m), 0) == 0
        for _ in range(15):
            A = int(rng.choice(scen))
            x, z = rng.random(prob.m), rng.random(prob.m)
            gx, gz = prob.g(x, A), prob.g(z, A)
            assert gx >= -1e-9
            # monotone in x: buying more never costs more in stage II
            assert prob.g(np.maximum(x, z), A) <= min(gx, gz) + 1e-7
            t = float(rng.random())
            assert prob.g(t * x + (1 - t) * z, A) <= t * gx + (1 - t) * gz + 1e-7
            d = prob.subgradient(x, A)
            assert gz >= gx + d @ (z - x) - 1e-7
            # buying in stage I at cost c costs at most lam times that later
            assert prob.g(np.zeros(prob.m), A) <= prob.g(x, A) + prob.lam * prob.c @ x + 1e-7
            assert prob.g(np.zeros(prob.m), A) <= prob.cost_bound() + 1e-9
        if prob.monotone:
            for A in scen:
                for B in scen:
                    if B & ~A == 0:
                        assert prob.g(np.zeros(prob.m), B) <= prob.g(np.zeros(prob.m), A) + 1e-9


@pytest.mark.parametrize("make", [vc3, fl2, steiner_path])
def test_cost_floor_is_a_floor(make):
    prob = make()
    rng = np.random.default_rng(0)
    floor = prob.cost_floor()
    for A in prob.space.enumerate():
        if A == 0:
            continue
        for _ in range(10):
            x = rng.random(prob.m)
            assert prob.c @ x + prob.g(x, A) >= floor - 1e-9
