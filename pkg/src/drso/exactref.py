"""Brute-force ground truth by full scenario enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import lp as lpmod
from .core import SCENARIO_GUARD, AmbiguityBall, ExplicitDistribution, ScenarioSpace
from .errors import NumericalFailure, TooLarge
from .gxy import GxyResult

MAX_FIRST_STAGE = 16


class EnumeratedUniverse:
    """All scenarios of a space, with a per-x table of second-stage values."""

    def __init__(self, space: ScenarioSpace, guard=SCENARIO_GUARD):
        self.space = space
        self.scenarios = space.enumerate(guard)

    @classmethod
    def of(cls, problem, guard=SCENARIO_GUARD):
        return cls(problem.space, guard)

    def table(self, problem, x):
        return np.array([problem.g(x, A) for A in self.scenarios])

    def __len__(self):
        return len(self.scenarios)


def _universe(problem, universe):
    return universe if universe is not None else EnumeratedUniverse.of(problem)


@dataclass
class InnerMax:
    value: float
    plan: dict  # (support scenario, target) -> mass, or target -> q


def _center(ball):
    p = ball.explicit if isinstance(ball, AmbiguityBall) else ball
    if p is None:
        raise ValueError("exact evaluation needs an explicit center")
    return p


def exact_inner_max(problem, x, ball: AmbiguityBall, universe=None, values=None) -> InnerMax:
    """Worst-case expected recourse over the ball; ``values`` overrides g(x, .)."""
    uni = _universe(problem, universe)
    p = _center(ball)
    vals = values if values is not None else {A: problem.g(x, A) for A in uni.scenarios}
    if ball.kind == "wasserstein":
        sigma = ball.metric
        cols = [
            lpmod.TransportColumn(a, B, vals[B], sigma.distance(A, B))
            for a, A in enumerate(p.support)
            for B in uni.scenarios
        ]
        res = lpmod.solve_transport_restricted(lpmod.TransportLpSpec(p.weights, cols, ball.r))
        plan = {(p.support[a], B): m for (a, B), m in res.plan.items()}
        return InnerMax(res.value, plan)
    pv = np.array([p.prob(A) for A in uni.scenarios])
    g = np.array([vals[A] for A in uni.scenarios])
    lo = np.maximum(pv - ball.r, 0.0)
    hi = np.minimum(pv + ball.r, 1.0)
    lp = lpmod.LinearProgram(g, np.ones((1, g.size)), [lpmod.EQ], [1.0], "max", lo, hi)
    res = lpmod.solve_lp(lp)
    if not res.optimal:
        raise NumericalFailure(f"L-infinity inner LP is {res.status.value}")
    return InnerMax(res.value, {A: q for A, q in zip(uni.scenarios, res.primal) if q > 1e-12})


def exact_objective(problem, x, ball, universe=None, values=None) -> float:
    x = np.asarray(x, dtype=float)
    return float(problem.c @ x) + exact_inner_max(problem, x, ball, universe, values).value


def integral_objective(problem, x, ball, universe=None) -> float:
    """Objective when every scenario is served by the integral recourse rounder."""
    uni = _universe(problem, universe)
    vals = {A: problem.recourse_cost(x, A) for A in uni.scenarios}
    return exact_objective(problem, x, ball, uni, vals)


def exact_discrete_optimum(problem, ball, universe=None):
    """Enumerate x in {0,1}^m; ties go to the lexicographically smallest x."""
    if problem.m > MAX_FIRST_STAGE:
        raise TooLarge(f"m={problem.m} exceeds {MAX_FIRST_STAGE}")
    uni = _universe(problem, universe)
    best_x, best = None, np.inf
    for bits in itertools.product((0.0, 1.0), repeat=problem.m):
        x = np.array(bits)
        val = exact_objective(problem, x, ball, uni)
        if val < best - 1e-9:
            best_x, best = x, val
    return best_x, best


def _stage_two_blocks(problem, scenarios, nx_, start):
    """Stack second-stage LPs for ``scenarios`` over a shared x block.

    Returns rows (list of (coeff dict, rel, rhs)), the objective cost per
    variable, and the column offset of each scenario's z block.
    """
    rows, cost, offsets = [], [], {}
    col = start
    bounds = []
    for B in scenarios:
        ss = problem.second_stage(B)
        nz = ss.cost.size
        offsets[B] = (col, ss)
        for r in range(ss.matrix.shape[0]):
            coef = {}
            for j in np.flatnonzero(ss.matrix[r]):
                coef[col + j] = ss.matrix[r, j]
            for j in np.flatnonzero(ss.jac[r]):
                coef[j] = coef.get(j, 0.0) - ss.jac[r, j]
            rows.append((coef, ss.relations[r], ss.base[r]))
        lo = np.zeros(nz) if ss.lower is None else ss.lower
        hi = np.full(nz, np.inf) if ss.upper is None else ss.upper
        bounds.append((lo, hi))
        col += nz
    return rows, offsets, bounds, col


def exact_fractional_optimum(problem, ball, universe=None):
    """min over x in [0,1]^m of the exact objective, as one LP over all scenarios."""
    uni = _universe(problem, universe)
    p = _center(ball)
    m = problem.m
    scen = uni.scenarios
    rows, offsets, bounds, nvar = _stage_two_blocks(problem, scen, m, m)
    obj_extra = []
    # z-block objective
    cost = np.zeros(nvar)
    cost[:m] = problem.c
    lo = [np.zeros(m)] + [b[0] for b in bounds]
    hi = [np.ones(m)] + [b[1] for b in bounds]

    def stage_cost(B):
        col, ss = offsets[B]
        return {col + j: ss.cost[j] for j in np.flatnonzero(ss.cost)}

    if ball.kind == "wasserstein":
        # theta_A per support scenario, then y
        th0 = nvar
        y = nvar + len(p.support)
        total = y + 1
        for a, A in enumerate(p.support):
            for B in scen:
                coef = {th0 + a: 1.0, y: ball.metric.distance(A, B)}
                for j, v in stage_cost(B).items():
                    coef[j] = coef.get(j, 0.0) - v
                rows.append((coef, lpmod.GE, 0.0))
        obj_extra = [(th0 + a, float(w)) for a, w in enumerate(p.weights)] + [(y, ball.r)]
        lo += [np.zeros(len(p.support) + 1)]
        hi += [np.full(len(p.support) + 1, np.inf)]
    else:
        pv = np.array([p.prob(A) for A in scen])
        ub = np.minimum(pv + ball.r, 1.0)
        lb = np.maximum(pv - ball.r, 0.0)
        t = nvar
        u0 = nvar + 1
        v0 = u0 + len(scen)
        total = v0 + len(scen)
        for i, B in enumerate(scen):
            coef = {t: 1.0, u0 + i: 1.0, v0 + i: -1.0}
            for j, v in stage_cost(B).items():
                coef[j] = coef.get(j, 0.0) - v
            rows.append((coef, lpmod.GE, 0.0))
        obj_extra = [(t, 1.0)] + [(u0 + i, ub[i]) for i in range(len(scen))]
        obj_extra += [(v0 + i, -lb[i]) for i in range(len(scen))]
        lo += [np.array([-np.inf]), np.zeros(2 * len(scen))]
        hi += [np.full(1 + 2 * len(scen), np.inf)]
    obj = np.zeros(total)
    obj[:nvar] = cost
    for j, v in obj_extra:
        obj[j] += v
    M = np.zeros((len(rows), total))
    rel, rhs = [], []
    for r, (coef, rl, b) in enumerate(rows):
        for j, v in coef.items():
            M[r, j] = v
        rel.append(rl)
        rhs.append(b)
    lp = lpmod.LinearProgram(obj, M, rel, rhs, "min", np.concatenate(lo), np.concatenate(hi))
    res = lpmod.solve_lp(lp)
    if not res.optimal:
        raise NumericalFailure(f"full DR LP is {res.status.value}")
    return res.primal[:m].copy(), res.value


def exact_gxy(problem, x, y, A, metric, universe=None) -> GxyResult:
    uni = _universe(problem, universe)
    best, best_val = None, -np.inf
    for B in uni.scenarios:
        val = problem.g(x, B) - y * metric.distance(A, B)
        if val > best_val + 1e-12:
            best, best_val = B, val
    return GxyResult(best, best_val, 1.0, 1.0)


def robust_value(problem, x, universe=None):
    uni = _universe(problem, universe)
    return float(problem.c @ np.asarray(x, dtype=float)) + max(problem.g(x, A) for A in uni.scenarios)


def half_l1_inner_max(problem, x, p: ExplicitDistribution, r, universe=None):
    """Discrete-metric inner max written over q directly: max E_q[g] s.t. 1/2|q-p|_1 <= r."""
    uni = _universe(problem, universe)
    scen = uni.scenarios
    n = len(scen)
    g = np.array([problem.g(x, A) for A in scen])
    pv = np.array([p.prob(A) for A in scen])
    # variables q (n), s (n) with s >= |q - p|
    obj = np.concatenate([g, np.zeros(n)])
    rows, rel, rhs = [], [], []
    for i in range(n):
        row = np.zeros(2 * n)
        row[i], row[n + i] = 1.0, -1.0
        rows.append(row), rel.append(lpmod.LE), rhs.append(pv[i])
        row = np.zeros(2 * n)
        row[i], row[n + i] = -1.0, -1.0
        rows.append(row), rel.append(lpmod.LE), rhs.append(-pv[i])
    rows.append(np.concatenate([np.ones(n), np.zeros(n)])), rel.append(lpmod.EQ), rhs.append(1.0)
    rows.append(np.concatenate([np.zeros(n), np.full(n, 0.5)])), rel.append(lpmod.LE), rhs.append(r)
    res = lpmod.solve_lp(lpmod.LinearProgram(obj, np.array(rows), rel, rhs, "max"))
    return res.value
