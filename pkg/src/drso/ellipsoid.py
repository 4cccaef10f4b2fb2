"""Ellipsoid-based minimization of the DR objective over [0,1]^m.

Three routes are provided: ``solve_saa_poly`` (approximate subgradients from
column-generated transport plans, rounding at every center),
``solve_saa_collapsible`` (one exact LP when every worst case lies in a
small candidate list) and ``solve_setcover_specialized`` (covering problems,
cuts from the half-covered residual instance). ``minimize_convex`` is the
generic routine used for the L-infinity proxy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .core import ExplicitDistribution, ScenarioMetric, TwoStageProblem
from .errors import FlatEllipsoid, NumericalFailure
from .gxy import CollapseOracle, approx_transport, collapse

CONDITION_GUARD = 1e14


@dataclass
class EllipsoidState:
    """E = {x : (x - center)^T shape^{-1} (x - center) <= 1}."""

    center: np.ndarray
    shape: np.ndarray
    iteration: int = 0

    @classmethod
    def ball(cls, center, radius):
        center = np.asarray(center, dtype=float)
        return cls(center.copy(), radius**2 * np.eye(center.size))

    @property
    def dim(self):
        return self.center.size

    def log_volume(self):
        """Log volume relative to the unit ball."""
        sign, logdet = np.linalg.slogdet(self.shape)
        if sign <= 0:
            raise NumericalFailure("ellipsoid shape is not positive definite")
        return 0.5 * logdet

    def min_width(self):
        """Smallest width of E over all unit directions."""
        return 2.0 * math.sqrt(max(np.linalg.eigvalsh(self.shape)[0], 0.0))

    def contains(self, x, tol=1e-9):
        d = np.asarray(x, dtype=float) - self.center
        return float(d @ np.linalg.solve(self.shape, d)) <= 1 + tol

    def cut(self, a):
        """Smallest ellipsoid holding E and the half-space a.(x - center) <= 0."""
        a = np.asarray(a, dtype=float)
        m = self.dim
        Pa = self.shape @ a
        q = float(a @ Pa)
        if q <= 0:
            raise NumericalFailure("degenerate cut direction")
        b = Pa / math.sqrt(q)
        if m == 1:
            c = self.center - b / 2
            P = self.shape / 4
        else:
            c = self.center - b / (m + 1)
            P = (m * m / (m * m - 1.0)) * (self.shape - (2.0 / (m + 1)) * np.outer(b, b))
        P = (P + P.T) / 2
        w = np.linalg.eigvalsh(P)
        if w[0] <= 0 or w[-1] / w[0] > CONDITION_GUARD:
            raise FlatEllipsoid("ellipsoid shape matrix is ill-conditioned")
        self.center, self.shape = c, P
        self.iteration += 1


@dataclass
class CutRecord:
    kind: str  # "feasibility" or "objective"
    normal: np.ndarray
    anchor: np.ndarray
    rounded: np.ndarray | None = None
    estimate: float | None = None

    def as_trace(self, i):
        return {"iteration": i, "kind": self.kind, "estimate": self.estimate}


def box_violation(x, extra_cuts=()):
    """Normal of a violated constraint of [0,1]^m (or of an earlier cut), else None."""
    i = int(np.argmax(np.abs(x - 0.5)))
    if abs(x[i] - 0.5) > 0.5:
        a = np.zeros(x.size)
        a[i] = 1.0 if x[i] > 1 else -1.0
        return a
    for rec in extra_cuts:
        if rec.normal @ (x - rec.anchor) > 1e-12:
            return rec.normal
    return None


def subgradient_from_transport(problem: TwoStageProblem, x, plan) -> np.ndarray:
    """c + sum over (A, A') of gamma * (subgradient of g(., A') at x).

    ``plan`` is a TransportPlan, a TransportApprox, or a mapping target -> mass.
    """
    x = np.asarray(x, dtype=float)
    d = np.array(problem.c, dtype=float)
    if hasattr(plan, "plan"):
        plan = plan.plan
    items = plan.items()
    for key, mass in items:
        target = key[1] if isinstance(key, tuple) else key
        if mass:
            d = d + mass * problem.subgradient(x, target)
    return d


@dataclass
class Bound:
    lb: float


@dataclass
class ZeroOptimal:
    pass


def lower_bound(problem, r, metric: ScenarioMetric, oracle, p: ExplicitDistribution | None = None):
    """ZeroOptimal when every scenario is null, else a lower bound on min h.

    Any non-empty scenario costs at least ``problem.cost_floor()`` whatever x
    is. The center already puts its non-empty mass on such scenarios, and the
    adversary can move min(p(empty), r/sigma_max) more; without ``p`` only
    the moved share min(1, r/sigma_max) is counted.
    """
    floor = problem.cost_floor()
    x0 = np.zeros(problem.m)
    start = p.support[0] if p is not None else (problem.universe if problem.k is None else 0)
    out = oracle(problem, x0, 0.0, start, metric)
    if out.value <= 0 or out.value < floor / out.beta1:
        return ZeroOptimal()
    if floor <= 0:
        raise ValueError("a positive cost floor is needed to bound the optimum away from zero")
    smax = metric.sigma_max()
    movable = 1.0 if smax <= 0 else r / smax
    if p is None:
        share = min(1.0, movable)
    else:
        empty = p.prob(0)
        can_leave_empty = metric.kind == "discrete" or metric.anchor is not None
        share = min(1.0, (1.0 - empty) + (min(empty, movable) if can_leave_empty else 0.0))
        if share <= 0:
            return ZeroOptimal()  # all mass stays on the empty scenario, so h(0) = 0
    return Bound(floor * share / out.beta1)


@dataclass
class SaaSolution:
    x: np.ndarray
    estimate: float
    beta: float
    cuts: list = field(default_factory=list)
    oracle_calls: int = 0
    iterations: int = 0
    zero_optimal: bool = False
    fractional: np.ndarray | None = None

    def trace(self):
        return [rec.as_trace(i) for i, rec in enumerate(self.cuts)]


def _exhausted(E, target, mu):
    """True once E can no longer hold a copy of [0,1]^m scaled by mu.

    The volume test is the classical one; the width test covers the case
    where the remnant flattens onto a face (the cube has width >= 1 in
    every direction, so the copy has width >= mu).
    """
    return E.log_volume() < target or E.min_width() < mu


def _try_cut(E, a):
    """Cut E; False when the update would push the shape past the condition guard.

    This happens when the remnant is already pinned in every direction the
    cuts span and only stretches along the rest, so the loop stops and the
    best evaluated center stands.
    """
    try:
        E.cut(a)
    except FlatEllipsoid:
        return False
    return True


def iteration_budget(m, R, V, mu):
    return max(1, math.ceil(2 * m * m * math.log(2 * R / (mu * V))))


def _target_log_volume(m, V, mu):
    return m * math.log(mu * V)


def solve_saa_poly(problem, p: ExplicitDistribution, r, metric, oracle, rounder=None, eps=0.1, max_iter=None):
    """Ellipsoid over the center sequence; each center is rounded and scored.

    At a feasible center x_bar the rounder gives x~, column generation at x~
    gives a plan gamma and the estimate c.x~ + value, and the cut normal is
    c + sum gamma * d(x_bar, A'), with subgradients taken at the center. The
    best estimate over all centers is returned.
    """
    rounder = rounder or problem.local_round
    m = problem.m
    beta = oracle.beta1 * oracle.beta2
    lb = lower_bound(problem, r, metric, oracle, p)
    if isinstance(lb, ZeroOptimal):
        x0 = np.zeros(m)
        tr = approx_transport(problem, x0, p, r, metric, oracle)
        return SaaSolution(x0, tr.value, beta, [], tr.oracle_calls, 0, True)
    R, V = problem.R, problem.V
    kappa = eps * lb.lb
    Kp = float(np.linalg.norm(problem.c)) + problem.K
    mu = min(1.0, kappa / (2 * Kp * R)) if Kp > 0 else 1.0
    N = iteration_budget(m, R, V, mu)
    if max_iter is not None:
        N = min(N, max_iter)
    E = EllipsoidState.ball(np.full(m, 0.5), R)
    target = _target_log_volume(m, V, mu)
    cuts, calls = [], 0
    best = None
    for _ in range(N):
        xb = E.center.copy()
        a = box_violation(xb, [c for c in cuts if c.kind == "objective"])
        if a is not None:
            cuts.append(CutRecord("feasibility", a, xb))
            if not _try_cut(E, a) or _exhausted(E, target, mu):
                break
            continue
        xt = np.asarray(rounder(xb).x, dtype=float)
        tr = approx_transport(problem, xt, p, r, metric, oracle)
        calls += tr.oracle_calls
        est = float(problem.c @ xt) + tr.value
        a = subgradient_from_transport(problem, xb, tr.plan_by_target())
        cuts.append(CutRecord("objective", a, xb, xt, est))
        if best is None or est < best[1] - 1e-12:
            best = (xt, est, xb)
        if np.linalg.norm(a) <= 1e-12:
            break
        if not _try_cut(E, a) or _exhausted(E, target, mu):
            break
    return SaaSolution(best[0], best[1], beta, cuts, calls, E.iteration, False, best[2])


# ---------------------------------------------------------------- collapsible scenario sets


@dataclass
class CollapsibleSolution:
    x_frac: np.ndarray
    value: float
    x: np.ndarray
    value_rounded: float
    y: float
    rounding: object = None


def build_dr_lp(problem, p: ExplicitDistribution, r, metric, candidates):
    """min c.x + sum p_A theta_A + r y with theta_A >= c_B.z_B - y sigma(A, B) for B in candidates[A].

    Returns the LP and the column layout (x block, z offsets, theta start, y).
    """
    m = problem.m
    targets = sorted({B for A in p.support for B in candidates[A]})
    blocks, offsets = [], {}
    col = m
    for B in targets:
        ss = problem.second_stage(B)
        offsets[B] = (col, ss)
        col += ss.cost.size
    th0 = col
    yv = th0 + len(p.support)
    nvar = yv + 1
    obj = np.zeros(nvar)
    obj[:m] = problem.c
    obj[th0:yv] = p.weights
    obj[yv] = r
    lo = np.zeros(nvar)
    hi = np.full(nvar, np.inf)
    hi[:m] = 1.0
    rows, rel, rhs = [], [], []
    for B in targets:
        start, ss = offsets[B]
        nz = ss.cost.size
        if ss.lower is not None:
            lo[start : start + nz] = ss.lower
        if ss.upper is not None:
            hi[start : start + nz] = ss.upper
        for i in range(ss.matrix.shape[0]):
            row = np.zeros(nvar)
            row[start : start + nz] = ss.matrix[i]
            row[:m] -= ss.jac[i]
            rows.append(row)
            rel.append(ss.relations[i])
            rhs.append(ss.base[i])
    for a, A in enumerate(p.support):
        for B in candidates[A]:
            row = np.zeros(nvar)
            row[th0 + a] = 1.0
            row[yv] = metric.distance(A, B)
            start, ss = offsets[B]
            row[start : start + ss.cost.size] -= ss.cost
            rows.append(row)
            rel.append(lpmod.GE)
            rhs.append(0.0)
    lp = lpmod.LinearProgram(obj, np.array(rows), rel, rhs, "min", lo, hi)
    return lp, yv


def solve_saa_collapsible(problem, p: ExplicitDistribution, r, metric, rounder=None):
    """Exact fractional optimum from the compact LP, then restricted local rounding."""
    cand = {A: collapse(A, metric, problem.n_ground, problem.monotone) for A in p.support}
    lp, yv = build_dr_lp(problem, p, r, metric, cand)
    res = lpmod.solve_lp(lp)
    if not res.optimal:
        raise NumericalFailure(f"DR LP is {res.status.value}")
    xbar = np.clip(res.primal[: problem.m], 0.0, 1.0)
    scen = sorted({B for bs in cand.values() for B in bs})
    rnd = rounder(xbar, scen) if rounder is not None else problem.restricted_local_round(xbar, scen)
    xt = np.asarray(rnd.x, dtype=float)
    tr = approx_transport(problem, xt, p, r, metric, CollapseOracle())
    return CollapsibleSolution(xbar, res.value, xt, float(problem.c @ xt) + tr.value, float(res.primal[yv]), rnd)


# ---------------------------------------------------------------- set cover variant


def half_covered(problem, x):
    cov = problem.coverage(x)
    return sum(1 << e for e in np.flatnonzero(cov >= 0.5 - 1e-12))


def augmented_instance(problem, S):
    """Copy of the cover instance with an extra free set covering S."""
    from .problems.covering import SetCoverInstance

    inst = SetCoverInstance(
        problem.n_ground,
        problem.sets + [S],
        np.append(problem.c, 0.0),
        np.append(problem.c2, 0.0),
        problem.k,
    )
    return inst


@dataclass
class SetCoverSolution:
    x_frac: np.ndarray
    estimate: float
    x: np.ndarray
    beta: float
    cuts: list = field(default_factory=list)


def solve_setcover_specialized(problem, p: ExplicitDistribution, r, metric, oracle, eps=0.1, max_iter=None):
    """Ellipsoid where each center is scored through the half-covered residual.

    With S the elements covered at least 1/2 by x_bar, the estimate is
    2 c.x_bar plus the transport value of g(0, . minus S), computed on an
    instance where S is one free set; x~ = min(2 x_bar, 1).
    """
    m = problem.m
    beta = oracle.beta1 * oracle.beta2
    lb = lower_bound(problem, r, metric, oracle, p)
    if isinstance(lb, ZeroOptimal):
        x0 = np.zeros(m)
        tr = approx_transport(problem, x0, p, r, metric, oracle)
        return SetCoverSolution(x0, tr.value, x0, beta)
    R, V = problem.R, problem.V
    kappa = eps * lb.lb
    Kp = float(np.linalg.norm(problem.c)) + problem.K
    mu = min(1.0, kappa / (2 * Kp * R))
    N = iteration_budget(m, R, V, mu)
    if max_iter is not None:
        N = min(N, max_iter)
    E = EllipsoidState.ball(np.full(m, 0.5), R)
    target = _target_log_volume(m, V, mu)
    aug_cache = {}
    cuts, best = [], None
    for _ in range(N):
        xb = E.center.copy()
        a = box_violation(xb, [c for c in cuts if c.kind == "objective"])
        if a is not None:
            cuts.append(CutRecord("feasibility", a, xb))
            if not _try_cut(E, a) or _exhausted(E, target, mu):
                break
            continue
        S = half_covered(problem, xb)
        aug = aug_cache.get(S)
        if aug is None:
            aug = aug_cache[S] = augmented_instance(problem, S)
        tr = approx_transport(aug, np.zeros(m + 1), p, r, metric, oracle)
        est = 2 * float(problem.c @ xb) + tr.value
        a = subgradient_from_transport(problem, xb, tr.plan_by_target())
        cuts.append(CutRecord("objective", a, xb, np.minimum(2 * xb, 1.0), est))
        if best is None or est < best[1] - 1e-12:
            best = (xb, est)
        if np.linalg.norm(a) <= 1e-12:
            break
        if not _try_cut(E, a) or _exhausted(E, target, mu):
            break
    return SetCoverSolution(best[0], best[1], np.minimum(2 * best[0], 1.0), beta, cuts)


# ---------------------------------------------------------------- generic convex minimization


def convex_iterations(m, R, V, K, kappa):
    return max(1, math.ceil(2 * m * m * math.log(max(16 * K * R * R / (V * kappa), math.e))))


def subgradient_slack(m, R, V, K, kappa, eps):
    """omega = eps/(2n), n = N ln(8 N K R / kappa), for the oracle feeding minimize_convex."""
    N = convex_iterations(m, R, V, K, kappa)
    n = N * math.log(max(8 * N * K * R / kappa, math.e))
    return eps / (2 * n)


@dataclass
class ConvexResult:
    x: np.ndarray
    value: float
    iterations: int
    trace: list = field(default_factory=list)


def minimize_convex(oracle, m, R, V, K, eps, kappa, max_iter=None):
    """Ellipsoid with (approximate) subgradients over [0,1]^m.

    ``oracle(x)`` returns (value, subgradient). Cuts go through feasible
    centers; the feasible center with the smallest reported value wins.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    N = convex_iterations(m, R, V, K, kappa)
    if max_iter is not None:
        N = min(N, max_iter)
    E = EllipsoidState.ball(np.full(m, 0.5), R)
    mu = min(1.0, kappa / (8 * K * R)) if K > 0 else 1.0
    target = m * math.log(mu * V)
    best, trace = None, []
    for _ in range(N):
        xb = E.center.copy()
        a = box_violation(xb)
        if a is not None:
            trace.append({"iteration": E.iteration, "kind": "feasibility", "value": None})
            if not _try_cut(E, a):
                break
            continue
        val, sg = oracle(xb)
        trace.append({"iteration": E.iteration, "kind": "objective", "value": float(val)})
        if best is None or val < best[1] - 1e-15:
            best = (xb, float(val))
        sg = np.asarray(sg, dtype=float)
        if np.linalg.norm(sg) <= 1e-15:
            break
        if not _try_cut(E, sg) or _exhausted(E, target, mu):
            break
    return ConvexResult(best[0], best[1], E.iteration, trace)
