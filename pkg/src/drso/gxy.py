"""Oracles for g(x, y, A) = max over B of g(x, B) - y*sigma(A, B).

An oracle is any callable ``oracle(problem, x, y, A, metric) -> GxyResult``
exposing ``beta1`` and ``beta2``. The guarantee (beta1, beta2) means the
returned scenario S satisfies, for every B,

    g(x, S) - y*sigma(A, S) >= g(x, B)/beta1 - beta2*y*sigma(A, B).

Column generation in ``approx_transport`` turns such an oracle into a
transport plan within a factor beta1*beta2 of optimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .core import ExplicitDistribution, ScenarioMetric, members, size
from .errors import AnchorMissing, EmptyGrid, NotMonotone, NumericalFailure, OracleContractViolation, TooLarge

BRUTE_GUARD = 20


@dataclass
class GxyResult:
    scenario: int
    value: float
    beta1: float = 1.0
    beta2: float = 1.0

    def __post_init__(self):
        if self.beta1 < 1 or self.beta2 < 1:
            raise ValueError("guarantee factors must be at least 1")


def _better(val, mask, best_val, best_mask, tol=1e-12):
    return val > best_val + tol or (abs(val - best_val) <= tol and mask < best_mask)


# ---------------------------------------------------------------- k-max-min oracles


def kmaxmin_bruteforce(problem, x, k, candidates=None):
    """argmax of g(x, A) over |A| <= k (restricted to subsets of ``candidates``)."""
    n = problem.n_ground
    if n > BRUTE_GUARD:
        raise TooLarge(f"|U|={n} exceeds the brute-force guard {BRUTE_GUARD}")
    pool = problem.universe if candidates is None else candidates
    best, best_val = 0, 0.0
    sub = pool
    # enumerate submasks of pool in increasing order
    subs = []
    while True:
        subs.append(sub)
        if sub == 0:
            break
        sub = (sub - 1) & pool
    for A in sorted(subs):
        if size(A) > k:
            continue
        val = problem.g(x, A)
        if val > best_val + 1e-12:
            best, best_val = A, val
    return best


def kmaxmin_cover_heuristic(problem, x, k, candidates=None, brute_limit=256):
    """Greedy growth by largest increase of the covering LP value.

    Brute force is used instead whenever the candidate family has at most
    ``brute_limit`` members.
    """
    pool = problem.universe if candidates is None else candidates
    elems = members(pool)
    k = min(k, len(elems))
    if k == len(elems) and problem.monotone:
        return pool
    count = sum(math.comb(len(elems), i) for i in range(k + 1))
    if count <= brute_limit:
        return kmaxmin_bruteforce(problem, x, k, pool)
    A = 0
    for _ in range(k):
        best, best_val = None, -np.inf
        for e in elems:
            if A >> e & 1:
                continue
            val = problem.g(x, A | 1 << e)
            if val > best_val + 1e-12:
                best, best_val = e, val
        if best is None:
            break
        A |= 1 << best
    return A


@dataclass
class CostShareTable:
    clients: int
    shares: dict
    times: np.ndarray

    def total(self):
        return float(sum(self.shares.values()))

    def share(self, j):
        return self.shares.get(j, 0.0)


def _open_time(dists, fee):
    """Earliest t with sum_j max(t - d_j, 0) = fee."""
    if fee <= 0:
        return 0.0
    if dists.size == 0:
        return math.inf
    d = np.sort(dists)
    csum = np.cumsum(d)
    for k in range(1, d.size + 1):
        t = (fee + csum[k - 1]) / k
        if k == d.size or t <= d[k]:
            return float(t)
    return math.inf


def fl_cost_shares(fl, x, J) -> CostShareTable:
    """Shares from uniformly growing client balls.

    Facility i opens at the first time the clients' overflow past their
    distances pays its adjusted fee (0 if bought in stage I, else its
    stage-II price). A client's share is the first time its own ball reaches
    an open facility. The share properties (competitiveness against g(x, J)
    in particular) need an integral x.
    """
    clients = list(members(J))
    x = np.asarray(x, dtype=float)
    fee = np.where(x >= 1 - 1e-9, 0.0, fl.f2)
    if not clients:
        return CostShareTable(J, {}, np.full(fl.nf, math.inf))
    d = fl.d[:, clients]
    times = np.array([_open_time(d[i], fee[i]) for i in range(fl.nf)])
    shares = {}
    for t, j in enumerate(clients):
        shares[j] = float(np.min(np.maximum(times, d[:, t])))
    return CostShareTable(J, shares, times)


def kmaxmin_fl_greedy(fl, x, k, candidates=None):
    """Add the client whose share after joining is largest, k times."""
    pool = fl.universe if candidates is None else candidates
    cl = members(pool)
    k = min(k, len(cl))
    J = 0
    for _ in range(k):
        best, best_val = None, -np.inf
        for j in cl:
            if J >> j & 1:
                continue
            val = fl_cost_shares(fl, x, J | 1 << j).share(j)
            if val > best_val + 1e-12:
                best, best_val = j, val
        J |= 1 << best
    return J


# ---------------------------------------------------------------- g(x, y, A) oracles


def gxy_discrete(problem, x, y, A, maxmin, beta=1.0) -> GxyResult:
    """Discrete metric: stay at A, or jump to the costliest scenario and pay y."""
    star = maxmin(problem, x)
    stay = problem.g(x, A)
    move = problem.g(x, star) - (y if star != A else 0.0)
    if move > stay + 1e-12:
        return GxyResult(star, move, beta, 1.0)
    return GxyResult(A, stay, beta, 1.0)


def collapse(A, metric: ScenarioMetric, n_ground, monotone=True):
    """Candidate scenarios that always contain a maximizer of g(x, y, A)."""
    if not monotone:
        raise NotMonotone("collapse needs monotone second-stage costs")
    U = (1 << n_ground) - 1
    if metric.kind == "discrete":
        return [A] if A == U else [A, U]
    reach = metric.reach(A)
    if reach is None:
        raise AnchorMissing("collapse from the empty scenario needs an anchor")
    out = []
    for mu in metric.levels():
        B = A
        for j in np.flatnonzero(reach <= mu + 1e-12):
            B |= 1 << int(j)
        if B not in out:
            out.append(B)
    return out


def sigma_levels(metric, A):
    """Every value sigma(A, B) can take."""
    if metric.kind == "discrete":
        return [0.0, 1.0]
    reach = metric.reach(A)
    vals = {0.0} if reach is None else {0.0, *np.unique(reach).tolist()}
    return sorted(vals)


def geometric_grid(smin, smax, eps):
    """{0} plus smin*(1+eps)^i up to the first value reaching smax."""
    if smax <= 0:
        raise EmptyGrid("all scenario distances are zero")
    out = [0.0]
    mu = smin
    while True:
        out.append(mu)
        if mu >= smax - 1e-12:
            return out
        mu *= 1 + eps


def gxy_enumerated(problem, x, y, A, metric, constrained, eps=None, beta=1.0) -> GxyResult:
    """Try every distance level (eps None) or a geometric grid of ratio 1+eps."""
    if eps is None:
        levels = sigma_levels(metric, A)
        b2 = 1.0
    else:
        try:
            levels = geometric_grid(metric.sigma_min_positive(), metric.sigma_max(), eps)
        except EmptyGrid:
            levels = [0.0]
        b2 = 1.0 + eps
    best, best_val = None, -np.inf
    for mu in levels:
        B = constrained(problem, x, A, mu, metric)
        val = problem.g(x, B) - y * metric.distance(A, B)
        if best is None or _better(val, B, best_val, best):
            best, best_val = B, val
    return GxyResult(best, best_val, beta, b2)


def constrained_bruteforce(problem, x, A, mu, metric, scenarios=None):
    """Exact max of g(x, B) over B with sigma(A, B) <= mu."""
    pool = scenarios if scenarios is not None else problem.space.enumerate()
    best, best_val = A, problem.g(x, A)
    for B in pool:
        if metric.distance(A, B) <= mu + 1e-12:
            val = problem.g(x, B)
            if _better(val, B, best_val, best):
                best, best_val = B, val
    return best


def constrained_collapse(problem, x, A, mu, metric):
    """All-subsets monotone case: the largest scenario within distance mu is optimal."""
    if not problem.monotone:
        raise NotMonotone("maximal-set constrained oracle needs monotone costs")
    if metric.kind == "discrete":
        return problem.universe if mu >= 1 else A
    reach = metric.reach(A)
    B = A
    if reach is not None:
        for j in np.flatnonzero(reach <= mu + 1e-12):
            B |= 1 << int(j)
    return B


def constrained_fl_greedy(problem, x, A, mu, metric):
    """k-bounded facility location: greedy shares over clients within distance mu."""
    if metric.kind == "discrete":
        pool = problem.universe if mu >= 1 else A
    else:
        reach = metric.reach(A)
        pool = 0
        if reach is not None:
            for j in np.flatnonzero(reach <= mu + 1e-12):
                pool |= 1 << int(j)
    k = problem.k if problem.k is not None else problem.n_ground
    return kmaxmin_fl_greedy(problem, x, k, pool)


class ExactOracle:
    """Full enumeration; guarantee (1, 1)."""

    beta1 = beta2 = 1.0

    def __init__(self, scenarios=None):
        self.scenarios = scenarios

    def __call__(self, problem, x, y, A, metric):
        pool = self.scenarios if self.scenarios is not None else problem.space.enumerate()
        best, best_val = None, -np.inf
        for B in pool:
            val = problem.g(x, B) - y * metric.distance(A, B)
            if best is None or _better(val, B, best_val, best):
                best, best_val = B, val
        return GxyResult(best, best_val, 1.0, 1.0)


class CollapseOracle:
    """Exact for monotone problems over all subsets: maximize over collapse(A)."""

    beta1 = beta2 = 1.0

    def __call__(self, problem, x, y, A, metric):
        if problem.k is not None:
            raise ValueError("collapse needs the all-subsets scenario collection")
        best, best_val = None, -np.inf
        for B in collapse(A, metric, problem.n_ground, problem.monotone):
            val = problem.g(x, B) - y * metric.distance(A, B)
            if best is None or _better(val, B, best_val, best):
                best, best_val = B, val
        return GxyResult(best, best_val, 1.0, 1.0)


class MaxMinOracle:
    """Discrete metric oracle from a k-max-min routine with factor ``beta``."""

    beta2 = 1.0

    def __init__(self, maxmin, beta=1.0):
        self.maxmin = maxmin
        self.beta1 = float(beta)

    def __call__(self, problem, x, y, A, metric):
        if metric.kind != "discrete":
            raise ValueError("MaxMinOracle needs the discrete metric")
        k = problem.k if problem.k is not None else problem.n_ground
        return gxy_discrete(problem, x, y, A, lambda p, xx: self.maxmin(p, xx, k), self.beta1)


class LevelOracle:
    """Enumerate distance levels (eps None) or a geometric grid over a constrained oracle."""

    def __init__(self, constrained, beta=1.0, eps=None):
        self.constrained = constrained
        self.beta1 = float(beta)
        self.eps = eps
        self.beta2 = 1.0 if eps is None else 1.0 + eps

    def __call__(self, problem, x, y, A, metric):
        return gxy_enumerated(problem, x, y, A, metric, self.constrained, self.eps, self.beta1)


def default_oracle(problem, metric):
    """Exact oracle suited to the problem: collapse when valid, else enumeration."""
    if problem.monotone and problem.k is None:
        return CollapseOracle()
    return ExactOracle()


# ---------------------------------------------------------------- transport by column generation


@dataclass
class TransportApprox:
    value: float
    plan: lpmod.TransportPlan
    support: tuple
    theta: np.ndarray
    y: float
    oracle_calls: int
    rounds: int
    columns: list = field(default_factory=list)

    def plan_by_target(self):
        """Total mass moved onto each target scenario."""
        out = {}
        for (a, B), mass in self.plan.items():
            out[B] = out.get(B, 0.0) + mass
        return out

    def flows(self):
        """Iterate over (source scenario, target scenario, mass)."""
        for (a, B), m in self.plan.items():
            yield self.support[a], B, m


def approx_transport(problem, x, p: ExplicitDistribution, r, metric, oracle, max_rounds=500, values=None):
    """Column generation on the transport dual.

    The restricted primal is re-solved over the collected columns; each
    support scenario is priced with the oracle at the current duals, and
    columns beating their row dual are added. ``values`` may replace
    g(x, .) by another scenario function (the oracle must price that one).
    """
    gval = values if values is not None else (lambda B: problem.g(x, B))
    support = p.support
    w = p.weights
    scale = float(np.sum(problem.c)) + max((gval(A) for A in support), default=0.0)
    eps = 2.0**-40 * max(scale, 1.0)
    tol = max(eps, 1e-9 * max(scale, 1.0))
    cols = [lpmod.TransportColumn(a, A, gval(A), 0.0) for a, A in enumerate(support)]
    have = {(a, A) for a, A in enumerate(support)}
    calls = 0
    for rnd in range(1, max_rounds + 1):
        res = lpmod.solve_transport_restricted(lpmod.TransportLpSpec(w, cols, r))
        theta, y = res.row_duals, max(res.budget_dual, 0.0)
        added = 0
        for a, A in enumerate(support):
            out = oracle(problem, x, y, A, metric)
            calls += 1
            if out.value < gval(A) / out.beta1 - tol:
                raise OracleContractViolation(
                    f"oracle value {out.value} below g(x,A)/beta1 = {gval(A) / out.beta1} for A={A}"
                )
            if out.value > theta[a] + tol and (a, out.scenario) not in have:
                have.add((a, out.scenario))
                cols.append(lpmod.TransportColumn(a, out.scenario, gval(out.scenario), metric.distance(A, out.scenario)))
                added += 1
        if not added:
            return TransportApprox(res.value, res.plan, support, theta, y, calls, rnd, cols)
    raise NumericalFailure("column generation did not settle")
