import itertools

import networkx as nx
import numpy as np
import pytest

from drso.core import mask_of
from drso.problems import (
    EdgeCoverInstance,
    FacilityLocationInstance,
    SteinerInstance,
    fl2,
    generate,
    monotone_reduction,
    steiner_path,
    vc3,
)


def brute_cover_ip(prob, A, x=None):
    """Cheapest integral stage-II purchase covering A with x's full sets free."""
    x = np.zeros(prob.m) if x is None else np.asarray(x)
    free = [S for S in range(prob.m) if x[S] >= 1 - 1e-9]
    base = 0
    for S in free:
        base |= prob.sets[S]
    need = A & ~base
    best = np.inf
    for bits in range(2**prob.m):
        cov, cost = 0, 0.0
        for S in range(prob.m):
            if bits >> S & 1:
                cov |= prob.sets[S]
                cost += prob.c2[S]
        if cov & need == need:
            best = min(best, cost)
    return best


def brute_fl_ip(prob, x, A):
    cl = [j for j in range(prob.n_ground) if A >> j & 1]
    if not cl:
        return 0.0
    free = np.asarray(x) >= 1 - 1e-9
    best = np.inf
    for bits in range(2**prob.nf):
        opened = free | np.array([bits >> i & 1 for i in range(prob.nf)], dtype=bool)
        if not opened.any():
            continue
        extra = [i for i in range(prob.nf) if bits >> i & 1 and not free[i]]
        best = min(best, prob.f2[extra].sum() + prob.d[opened][:, cl].min(axis=0).sum())
    return best


def test_empty_scenario_costs_nothing():
    for prob in (vc3(), fl2(), steiner_path()):
        assert prob.g(np.zeros(prob.m), 0) == 0


def test_vc3_triangle_value():
    assert vc3().g(np.zeros(3), 7) == pytest.approx(3.0)
    assert vc3().g(np.zeros(3), 1) == pytest.approx(2.0)


def test_steiner_path_value():
    inst = steiner_path(2.0)
    x = np.zeros(inst.m)
    x[inst.edge(0, 1)] = 1.0
    # b is node 2, element 1
    assert inst.g(x, mask_of([1])) == pytest.approx(2.0)
    assert inst.g(np.zeros(inst.m), mask_of([1])) == pytest.approx(4.0)


def test_steiner_monotone_flow_is_not_undercut():
    # stage-I edge (a,b) does not help b reach the root without buying (s,a) later
    inst = steiner_path(2.0)
    x = np.zeros(inst.m)
    x[inst.edge(1, 2)] = 1.0
    assert inst.g(x, mask_of([1])) == pytest.approx(4.0)


def test_fl2_values():
    fl = fl2()
    # one facility at 0 serves all three clients: 2 + 0 + 5 + 10
    assert fl.g(np.zeros(2), 7) == pytest.approx(brute_fl_ip(fl, np.zeros(2), 7))
    assert fl.g(np.ones(2), 7) == pytest.approx(5.0)


def test_local_round_integral_is_identity():
    prob = vc3()
    for x in itertools.product([0.0, 1.0], repeat=3):
        r = prob.local_round(np.array(x))
        assert np.array_equal(r.x, np.array(x))
    rng = np.random.default_rng(0)
    for fam in ("set_cover", "edge_cover"):
        for seed in range(10):
            prob = generate(fam, seed)
            x = (rng.random(prob.m) < 0.5).astype(float)
            assert np.array_equal(prob.local_round(x).x, x)


def test_vc3_half_rounding():
    prob = vc3()
    r = prob.local_round(np.full(3, 0.5))
    assert np.array_equal(r.x, np.ones(3))
    assert prob.c @ r.x <= 4 * prob.c @ np.full(3, 0.5)


def test_fl2_half_rounding():
    fl = fl2()
    r = fl.local_round(np.full(2, 0.5))
    assert r.x.sum() >= 1
    assert fl.check_locality(np.full(2, 0.5), r, fl.space.enumerate())
    assert r.rho_emp <= 5.488


@pytest.mark.parametrize("family", ["set_cover", "vertex_cover", "edge_cover", "facility_location"])
def test_local_rounding_locality(family):
    rng = np.random.default_rng(5)
    for seed in range(25):
        prob = generate(family, seed)
        for _ in range(3):
            x = np.round(rng.random(prob.m) * rng.integers(0, 2, prob.m), 3)
            r = prob.local_round(x)
            assert set(np.unique(r.x)) <= {0.0, 1.0}
            assert prob.check_locality(x, r, prob.space.enumerate()), (seed, x, r.ratios)


def test_steiner_restricted_rounding_reports_certificates():
    inst = steiner_path()
    x = np.zeros(inst.m)
    x[inst.edge(0, 1)] = 0.5
    scen = [1, 2, 3]
    r = inst.restricted_local_round(x, scen)
    assert set(r.ratios) == {"first-stage", 1, 2, 3}
    assert np.isfinite(r.rho_emp)
    # x = 0 rounds to 0
    assert not inst.local_round(np.zeros(inst.m)).x.any()


def test_steiner_rounding_measured_within_declared_factor():
    rng = np.random.default_rng(2)
    for seed in range(20):
        inst = generate("steiner", seed)
        x = np.round(rng.random(inst.m) * rng.integers(0, 2, inst.m), 3)
        r = inst.restricted_local_round(x, inst.space.enumerate())
        assert r.rho_emp <= inst.rho


def _is_rooted_tree(inst, xt):
    G = nx.Graph()
    G.add_node(inst.root)
    G.add_edges_from(e for i, e in enumerate(inst.edge_list) if xt[i] > 0.5)
    return nx.is_tree(G) and inst.root in G


def test_monotone_reduction_examples():
    inst = steiner_path()
    tree = np.zeros(inst.m)
    tree[inst.edge(0, 1)] = tree[inst.edge(1, 2)] = 1.0
    assert np.array_equal(monotone_reduction(inst, tree), tree)
    assert not monotone_reduction(inst, np.zeros(inst.m)).any()


def test_monotone_reduction_far_pair():
    # root at 0; a far-away pair of edges {2,3} and {3,4} on a line
    pos = np.array([0.0, 1.0, 4.0, 5.0, 6.0])
    inst = SteinerInstance(np.abs(pos[:, None] - pos[None, :]), 2.0)
    xb = np.zeros(inst.m)
    xb[inst.edge(2, 3)] = xb[inst.edge(3, 4)] = 1.0
    xt = monotone_reduction(inst, xb)
    assert _is_rooted_tree(inst, xt)
    assert inst.c @ xt <= 2 * inst.c @ xb + 1e-9


def test_monotone_reduction_factor_two():
    rng = np.random.default_rng(9)
    for seed in range(40):
        inst = generate("steiner", seed)
        xb = (rng.random(inst.m) < 0.4).astype(float)
        xt = monotone_reduction(inst, xb)
        assert _is_rooted_tree(inst, xt)
        assert inst.c @ xt <= 2 * inst.c @ xb + 1e-9
        for A in inst.space.enumerate():
            assert inst.monotone_integral_cost(xt, A) <= 2 * inst.nonmonotone_integral_cost(xb, A) + 1e-9


def test_deterministic_round_covering_against_brute_force():
    for fam in ("set_cover", "vertex_cover", "edge_cover"):
        for seed in range(15):
            prob = generate(fam, seed)
            x = (np.random.default_rng(seed).random(prob.m) < 0.3).astype(float)
            for A in prob.space.enumerate():
                cost = prob.recourse_cost(x, A)
                ip = brute_cover_ip(prob, A, x)
                assert cost >= ip - 1e-9
                assert cost <= prob.alpha * prob.g(x, A) + 1e-7


def test_edge_cover_matching_is_exact():
    # cheapest-edge-plus-matching gives the minimum-cost edge cover
    for seed in range(30):
        prob = generate("edge_cover", seed)
        for A in prob.space.enumerate():
            assert prob.recourse_cost(np.zeros(prob.m), A) == pytest.approx(brute_cover_ip(prob, A))


def test_edge_cover_path_gap():
    prob = EdgeCoverInstance(3, [(0, 1), (1, 2)], [1.0, 1.0], [1.0, 1.0])
    A = prob.universe
    assert prob.recourse_cost(np.zeros(2), A) <= 1.5 * prob.g(np.zeros(2), A) + 1e-9


def test_vc_threshold_on_triangle():
    prob = vc3(1.0, 1.0)
    z = prob.cover(7, prob.c2, np.full(3, 0.5))
    assert np.array_equal(z, np.ones(3))
    assert prob.c2 @ z <= 2 * 1.5


def test_fl_deterministic_round_is_exact():
    rng = np.random.default_rng(4)
    for seed in range(20):
        fl = generate("facility_location", seed)
        x = (rng.random(fl.nf) < 0.4).astype(float)
        for A in fl.space.enumerate():
            cost = fl.recourse_cost(x, A)
            assert cost == pytest.approx(brute_fl_ip(fl, x, A))
            assert cost <= fl.alpha * fl.g(x, A) + 1e-7


def test_fl_filtering_round_is_feasible_and_bounded():
    for seed in range(20):
        fl = generate("facility_location", seed)
        for A in fl.space.enumerate()[1:]:
            rec = fl.filtering_round(np.zeros(fl.nf), A)
            assert rec.cost >= brute_fl_ip(fl, np.zeros(fl.nf), A) - 1e-9
            assert rec.cost <= 6 * fl.g(np.zeros(fl.nf), A) + 1e-7


def test_steiner_mst_completion_within_two():
    for seed in range(15):
        inst = generate("steiner", seed)
        x = np.zeros(inst.m)
        for A in inst.space.enumerate():
            mst = inst.recourse_cost(x, A)
            opt = inst.nonmonotone_integral_cost(x, A)
            assert opt - 1e-9 <= mst <= 2 * opt + 1e-9


def test_constructor_validation():
    with pytest.raises(ValueError):
        FacilityLocationInstance(np.zeros((2, 2)), 2, [1, 1], [1, 1])
    with pytest.raises(ValueError):
        SteinerInstance([[0, 1], [1, 0]], 0.5)
    with pytest.raises(ValueError):
        EdgeCoverInstance(3, [(0, 1)], [1.0], [1.0])


def test_generator_is_deterministic():
    a, b = generate("facility_location", 3), generate("facility_location", 3)
    assert np.array_equal(a.D, b.D) and np.array_equal(a.c, b.c)
