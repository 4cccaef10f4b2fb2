"""Dense two-phase primal simplex and the explicit-column transport LP.

The solver works on a full tableau. Entering columns are picked by the most
negative reduced cost; whenever that choice would give a degenerate pivot the
pivot is redone with Bland's smallest-index rule, so every run of degenerate
pivots follows Bland's rule and cannot cycle.

Dual values follow the sensitivity convention: ``dual[i]`` is the derivative
of the optimal value with respect to ``rhs[i]``. For a minimization problem
``>=`` rows therefore carry nonnegative duals and ``<=`` rows nonpositive ones.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

LE, EQ, GE = "<=", "=", ">="

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
GAP_TOL = 1e-6


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """``sense`` is "min" or "max"; bounds default to [0, inf)."""

    objective: np.ndarray
    matrix: np.ndarray
    relations: list
    rhs: np.ndarray
    sense: str = "min"
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = self.objective.size
        self.matrix = np.asarray(self.matrix, dtype=float).reshape(-1, n)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.relations = list(self.relations)
        k = self.matrix.shape[0]
        if self.rhs.size != k or len(self.relations) != k:
            raise ValueError("row dimensions disagree")
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {self.sense!r}")
        for rel in self.relations:
            if rel not in (LE, EQ, GE):
                raise ValueError(f"unknown relation {rel!r}")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bound dimensions disagree")
        for arr in (self.objective, self.matrix, self.rhs):
            if not np.all(np.isfinite(arr)):
                raise ValueError("coefficients must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def num_vars(self):
        return self.objective.size

    @property
    def num_rows(self):
        return self.rhs.size


@dataclass
class LpResult:
    status: Status
    value: float = float("nan")
    primal: np.ndarray | None = None
    dual: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    pivots: int = 0

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL


def _standardize(lp):
    """Rewrite as min c'y, A'y (rel) b', y >= 0 and remember how to map back."""
    n = lp.num_vars
    cols = []  # (original var, sign) per standard column
    shift = np.zeros(n)
    extra_rows = []  # (standard col, bound) meaning y <= bound
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    idx = np.array([j for j, _ in cols], dtype=int)
    sgn = np.array([s for _, s in cols])
    c = lp.objective[idx] * sgn
    if lp.sense == "max":
        c = -c
    A = lp.matrix[:, idx] * sgn if lp.num_rows else np.zeros((0, len(cols)))
    b = lp.rhs - lp.matrix @ shift
    rels = list(lp.relations)
    if extra_rows:
        E = np.zeros((len(extra_rows), len(cols)))
        for r, (col, bound) in enumerate(extra_rows):
            E[r, col] = 1.0
        A = np.vstack([A, E])
        b = np.concatenate([b, [bd for _, bd in extra_rows]])
        rels += [LE] * len(extra_rows)
    return c, A, b, rels, idx, sgn, shift


def _pivot(T, obj, basis, row, col):
    piv = T[row, col]
    T[row] /= piv
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    nz = np.abs(colvals) > 0
    if np.any(nz):
        T[nz] -= np.outer(colvals[nz], T[row])
    f = obj[col]
    if f != 0.0:
        obj -= f * T[row]
    basis[row] = col


def _choose(T, obj, basis, allowed, bland):
    """Return (status, row, col); status is 'opt', 'unb' or 'go'."""
    rc = obj[:-1]
    cand = np.flatnonzero(allowed & (rc < -PIVOT_TOL))
    if cand.size == 0:
        return "opt", -1, -1
    col = cand[0] if bland else cand[np.argmin(rc[cand])]
    column = T[:, col]
    pos = column > PIVOT_TOL * max(1.0, np.abs(column).max())
    if not np.any(pos):
        return "unb", -1, col
    rows = np.flatnonzero(pos)
    ratios = np.maximum(T[rows, -1], 0.0) / column[rows]
    best = ratios.min()
    ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
    if not bland and best <= 1e-12:
        return _choose(T, obj, basis, allowed, True)
    # Bland needs the smallest basic index; otherwise take the sturdiest pivot
    row = ties[np.argmin(basis[ties])] if bland else ties[np.argmax(column[ties])]
    return "go", row, col


REINVERT_EVERY = 100


def _reinvert(T, obj, basis, T0, cost):
    """Recompute the tableau and reduced costs from the original data."""
    B = T0[:, basis]
    try:
        T[:] = np.linalg.solve(B, T0)
    except np.linalg.LinAlgError:
        return
    obj[:-1] = cost - cost[basis] @ T[:, :-1]
    obj[-1] = -(cost[basis] @ T[:, -1])


def _run(T, obj, basis, allowed, limit, count, T0, cost):
    while True:
        status, row, col = _choose(T, obj, basis, allowed, False)
        if status == "opt":
            return "opt", count
        if status == "unb":
            return "unb", count
        _pivot(T, obj, basis, row, col)
        count += 1
        if count % REINVERT_EVERY == 0:
            _reinvert(T, obj, basis, T0, cost)
        if count > limit:
            raise NumericalFailure(f"simplex pivot limit {limit} exhausted")


def solve_lp(lp: LinearProgram) -> LpResult:
    c, A, b, rels, idx, sgn, shift = _standardize(lp)
    k, n = A.shape
    flip = b < 0
    A = A.copy()
    A[flip] *= -1
    b = np.where(flip, -b, b)
    rels = [r if not f else {LE: GE, GE: LE, EQ: EQ}[r] for r, f in zip(rels, flip)]
    row_sign = np.where(flip, -1.0, 1.0)

    n_slack = sum(r != EQ for r in rels)
    n_art = sum(r != LE for r in rels)
    N = n + n_slack + n_art
    T = np.zeros((k, N + 1))
    T[:, :n] = A
    T[:, -1] = b
    basis = np.zeros(k, dtype=int)
    init_cols = np.zeros(k, dtype=int)
    s = n
    a = n + n_slack
    for i, rel in enumerate(rels):
        if rel == LE:
            T[i, s] = 1.0
            basis[i] = init_cols[i] = s
            s += 1
        else:
            if rel == GE:
                T[i, s] = -1.0
                s += 1
            T[i, a] = 1.0
            basis[i] = init_cols[i] = a
            a += 1
    is_art = np.zeros(N, dtype=bool)
    is_art[n + n_slack:] = True
    limit = 50 * (lp.num_rows + lp.num_vars)
    limit = max(limit, 50)
    pivots = 0

    T0 = T.copy()
    if n_art:
        obj = np.zeros(N + 1)
        obj[:N][is_art] = 1.0
        art_rows = is_art[basis]
        obj -= T[art_rows].sum(axis=0)
        _, pivots = _run(T, obj, basis, np.ones(N, dtype=bool), limit, pivots, T0, is_art.astype(float))
        if -obj[-1] > FEAS_TOL * (1.0 + np.abs(b).max(initial=0.0)):
            return LpResult(Status.INFEASIBLE, pivots=pivots)
        for i in range(k):
            if is_art[basis[i]]:
                cand = np.flatnonzero(~is_art & (np.abs(T[i, :N]) > PIVOT_TOL))
                if cand.size:
                    _pivot(T, obj, basis, i, cand[np.argmax(np.abs(T[i, cand]))])
                    pivots += 1
                else:
                    T[i, -1] = 0.0  # redundant row; its artificial stays basic at zero

    cost = np.zeros(N)
    cost[:n] = c
    obj = np.zeros(N + 1)
    obj[:N] = cost
    obj -= cost[basis] @ T
    obj[-1] = -(cost[basis] @ T[:, -1])
    status, pivots = _run(T, obj, basis, ~is_art, limit, pivots, T0, cost)
    if status == "unb":
        return LpResult(Status.UNBOUNDED, pivots=pivots)
    if pivots >= REINVERT_EVERY:
        _reinvert(T, obj, basis, T0, cost)
        status, pivots = _run(T, obj, basis, ~is_art, limit, pivots, T0, cost)
        if status == "unb":
            return LpResult(Status.UNBOUNDED, pivots=pivots)

    y_std = np.zeros(N)
    y_std[basis] = T[:, -1]
    y = y_std[:n]
    x = shift.copy()
    np.add.at(x, idx, sgn * y)

    binv = T[:, init_cols]
    duals_std = cost[basis] @ binv
    duals_std = duals_std * row_sign
    if lp.sense == "max":
        duals_std = -duals_std
    dual = duals_std[: lp.num_rows]
    value = float(lp.objective @ x)
    reduced = lp.objective - lp.matrix.T @ dual if lp.num_rows else lp.objective.copy()
    res = LpResult(Status.OPTIMAL, value, x, dual, reduced, pivots)
    _certify(lp, res)
    return res


def dual_objective(lp: LinearProgram, dual: np.ndarray) -> float:
    """Lagrangian dual value for the given row multipliers (may be -inf/+inf)."""
    reduced = lp.objective - (lp.matrix.T @ dual if lp.num_rows else 0.0)
    total = float(dual @ lp.rhs) if lp.num_rows else 0.0
    for j, r in enumerate(reduced):
        if abs(r) <= FEAS_TOL:
            continue
        # for min: r>0 pushes x to its lower bound; for max the reverse
        at_lower = (r > 0) == (lp.sense == "min")
        bound = lp.lower[j] if at_lower else lp.upper[j]
        if not np.isfinite(bound):
            return -np.inf if lp.sense == "min" else np.inf
        total += r * bound
    return total


def _certify(lp, res):
    x, dual = res.primal, res.dual
    scale = 1.0 + max(np.abs(lp.rhs).max(initial=0.0), np.abs(x).max(initial=0.0))
    tol = FEAS_TOL * scale
    if np.any(x < lp.lower - tol) or np.any(x > lp.upper + tol):
        raise NumericalFailure("primal bounds violated")
    if lp.num_rows:
        act = lp.matrix @ x
        for rel, lhs, rhs in zip(lp.relations, act, lp.rhs):
            if (rel == LE and lhs > rhs + tol) or (rel == GE and lhs < rhs - tol) or (
                rel == EQ and abs(lhs - rhs) > tol
            ):
                raise NumericalFailure("primal row violated")
    sign = 1.0 if lp.sense == "min" else -1.0
    for rel, d in zip(lp.relations, dual):
        if (rel == GE and sign * d < -FEAS_TOL * scale) or (rel == LE and sign * d > FEAS_TOL * scale):
            raise NumericalFailure("dual sign violated")
    dval = dual_objective(lp, dual)
    if not abs(dval - res.value) <= GAP_TOL * (1.0 + abs(res.value)):
        raise NumericalFailure(f"duality gap {abs(dval - res.value):.3g}")


@dataclass
class TransportColumn:
    source: int  # index into the support
    target: int  # scenario bitmask
    value: float
    cost: float


@dataclass
class TransportLpSpec:
    masses: np.ndarray
    columns: list
    budget: float
    mass_cap: float | None = None

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if np.any(self.masses < 0):
            raise ValueError("row masses must be nonnegative")
        if any(col.cost < 0 for col in self.columns):
            raise ValueError("column costs must be nonnegative")


@dataclass
class TransportPlan:
    """Sparse mass map: ``flows[(source index, target mask)] = mass``."""

    flows: dict = field(default_factory=dict)

    def items(self):
        return self.flows.items()

    def total(self):
        return sum(self.flows.values())


@dataclass
class TransportResult:
    value: float
    plan: TransportPlan
    row_duals: np.ndarray
    budget_dual: float
    lp: LpResult


def solve_transport_restricted(spec: TransportLpSpec) -> TransportResult:
    """Maximize sum gamma*g over the listed columns subject to row masses and budget."""
    if not spec.columns:
        raise ValueError("candidate column list is empty")
    nr = spec.masses.size
    nc = len(spec.columns)
    rows = nr + 1 + (spec.mass_cap is not None)
    M = np.zeros((rows, nc))
    for j, col in enumerate(spec.columns):
        M[col.source, j] = 1.0
        M[nr, j] = col.cost
        if spec.mass_cap is not None:
            M[nr + 1, j] = 1.0
    rhs = np.concatenate([spec.masses, [spec.budget]] + ([[spec.mass_cap]] if spec.mass_cap is not None else []))
    obj = np.array([col.value for col in spec.columns])
    lp = LinearProgram(obj, M, [LE] * rows, rhs, sense="max")
    res = solve_lp(lp)
    if not res.optimal:
        raise NumericalFailure(f"transport LP returned {res.status.value}")
    plan = TransportPlan()
    for j, col in enumerate(spec.columns):
        if res.primal[j] > 1e-12:
            key = (col.source, col.target)
            plan.flows[key] = plan.flows.get(key, 0.0) + float(res.primal[j])
    return TransportResult(res.value, plan, res.dual[:nr].copy(), float(res.dual[nr]), res)
