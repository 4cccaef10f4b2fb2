"""Scenarios, scenario metrics, central distributions and the problem contract.

Scenarios are subsets of a ground set ``{0, ..., n-1}`` stored as integer
bitmasks. Bit ``j`` set means element ``j`` is present. Ordering by the integer
value of the mask is the tie-break order used throughout the package.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from . import lp as lpmod
from .errors import AnchorMissing, InfeasibleMarginals, TooLarge

SCENARIO_GUARD = 4096


# ---------------------------------------------------------------- scenarios


def mask_of(elements: Iterable[int]) -> int:
    m = 0
    for e in elements:
        m |= 1 << int(e)
    return m


def members(mask: int) -> tuple:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


def size(mask: int) -> int:
    return bin(mask).count("1")


def full_mask(n: int) -> int:
    return (1 << n) - 1


@dataclass(frozen=True)
class ScenarioSpace:
    """All subsets of an ``n``-element ground set, optionally of size at most ``k``."""

    n: int
    k: int | None = None

    @property
    def universe(self) -> int:
        return full_mask(self.n)

    def contains(self, mask: int) -> bool:
        return mask >> self.n == 0 and (self.k is None or size(mask) <= self.k)

    def count(self) -> int:
        if self.k is None or self.k >= self.n:
            return 2**self.n
        return sum(math.comb(self.n, i) for i in range(self.k + 1))

    def enumerate(self, guard: int = SCENARIO_GUARD) -> list:
        if self.count() > guard:
            raise TooLarge(f"{self.count()} scenarios exceed the guard {guard}")
        if self.k is None or self.k >= self.n:
            return list(range(2**self.n))
        out = []
        for i in range(self.k + 1):
            out.extend(mask_of(c) for c in itertools.combinations(range(self.n), i))
        return sorted(out)


# ---------------------------------------------------------------- metrics


@dataclass(frozen=True, eq=False)
class ScenarioMetric:
    """Distance between scenarios.

    ``kind`` is "discrete" (1 for distinct sets) or "asym_inf", where
    sigma(A, B) = max over b in B of the distance from b to the nearest member
    of A. ``anchor`` optionally gives each element's distance to a virtual
    element present in every scenario.
    """

    kind: str = "discrete"
    distances: np.ndarray | None = None
    anchor: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("discrete", "asym_inf"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "asym_inf":
            d = np.asarray(self.distances, dtype=float)
            if d.ndim != 2 or d.shape[0] != d.shape[1]:
                raise ValueError("asym_inf needs a square distance matrix")
            if np.any(d < 0) or not np.allclose(d, d.T) or np.any(np.diag(d) != 0):
                raise ValueError("distance matrix must be symmetric, nonnegative, zero diagonal")
            n = d.shape[0]
            for j in range(n):
                if np.any(d[j][:, None] > d[j][None, :] + d + 1e-9):
                    raise ValueError("distance matrix violates the triangle inequality")
            object.__setattr__(self, "distances", d)
            if self.anchor is not None:
                object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))

    @classmethod
    def discrete(cls):
        return cls("discrete")

    @classmethod
    def asym_inf(cls, distances, anchor=None):
        return cls("asym_inf", np.asarray(distances, dtype=float), anchor)

    def reach(self, A: int) -> np.ndarray:
        """Distance from every ground element to scenario A (anchor included)."""
        hit = self._cache.get(A)
        if hit is not None:
            return hit
        d = self.distances
        mem = list(members(A))
        if mem:
            out = d[mem].min(axis=0)
            if self.anchor is not None:
                out = np.minimum(out, self.anchor)
        elif self.anchor is not None:
            out = self.anchor.copy()
        else:
            out = None
        if len(self._cache) < 100000:
            self._cache[A] = out
        return out

    def __call__(self, A: int, B: int) -> float:
        return self.distance(A, B)

    def distance(self, A: int, B: int) -> float:
        if self.kind == "discrete":
            return 0.0 if A == B else 1.0
        if B == 0 or A == B:
            return 0.0
        r = self.reach(A)
        if r is None:
            raise AnchorMissing("distance from the empty scenario needs an anchor element")
        return float(r[list(members(B))].max())

    def levels(self) -> list:
        """All values sigma can take: 0 plus every ground and anchor distance."""
        if self.kind == "discrete":
            return [0.0, 1.0]
        vals = set(np.unique(self.distances).tolist())
        if self.anchor is not None:
            vals |= set(np.unique(self.anchor).tolist())
        vals.add(0.0)
        return sorted(vals)

    def sigma_max(self) -> float:
        return max(self.levels())

    def sigma_min_positive(self) -> float:
        pos = [v for v in self.levels() if v > 0]
        return min(pos) if pos else 0.0


def scenario_distance(metric: ScenarioMetric, A: int, B: int) -> float:
    return metric.distance(A, B)


# ---------------------------------------------------------------- distributions


def _as_fraction(p):
    return p if isinstance(p, Fraction) else Fraction(p)


@dataclass(frozen=True)
class ExplicitDistribution:
    """Finite distribution over scenario masks, support sorted by mask."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        merged = {}
        for s, p in zip(self.support, self.probs):
            merged[int(s)] = merged.get(int(s), 0) + _as_fraction(p)
        if any(p < 0 for p in merged.values()):
            raise InfeasibleMarginals("negative probability")
        total = float(sum(merged.values()))
        if abs(total - 1.0) > 1e-12:
            raise InfeasibleMarginals(f"probabilities sum to {total!r}")
        keys = sorted(k for k, v in merged.items() if v > 0)
        object.__setattr__(self, "support", tuple(keys))
        object.__setattr__(self, "probs", tuple(merged[k] for k in keys))

    @classmethod
    def from_mapping(cls, mapping):
        return cls(tuple(mapping.keys()), tuple(mapping.values()))

    @classmethod
    def point(cls, mask):
        return cls((mask,), (Fraction(1),))

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    def as_dict(self):
        return dict(zip(self.support, self.probs))

    def prob(self, mask) -> float:
        try:
            return float(self.probs[self.support.index(mask)])
        except ValueError:
            return 0.0

    def mix(self, other, theta):
        """theta*self + (1-theta)*other."""
        t = _as_fraction(theta)
        out = {}
        for s, p in zip(self.support, self.probs):
            out[s] = out.get(s, 0) + t * p
        for s, p in zip(other.support, other.probs):
            out[s] = out.get(s, 0) + (1 - t) * p
        return ExplicitDistribution.from_mapping(out)


_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def split_seed(seed: int, *path: int) -> int:
    """Derive a child seed from a parent seed and an index path (splitmix64 chain)."""
    h = _mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    for p in path:
        h = _mix64(h ^ np.uint64(p & 0xFFFFFFFFFFFFFFFF))
    return int(h[0] >> np.uint64(1))


def uniforms(seed: int, start: int, count: int, stride: int = 1) -> np.ndarray:
    """Uniform [0,1) numbers for draw indices start..start+count-1.

    Each value is a pure function of (seed, index, lane), so draws can be
    generated in any order or in parallel. Returns shape (count, stride).
    """
    base = _mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    idx = np.arange(start, start + count, dtype=np.uint64)[:, None] * np.uint64(stride)
    idx = idx + np.arange(stride, dtype=np.uint64)[None, :]
    h = _mix64(_mix64(idx) ^ base)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class ExplicitSampler:
    def __init__(self, dist: ExplicitDistribution):
        self.dist = dist
        self._cdf = np.cumsum(dist.weights)
        self._cdf[-1] = 1.0
        self._masks = np.array(dist.support, dtype=object)

    def draw(self, seed, start, count):
        u = uniforms(seed, start, count)[:, 0]
        pos = np.searchsorted(self._cdf, u, side="right")
        return [self.dist.support[i] for i in pos]


class IndependentSampler:
    """Each ground element appears independently with its own probability."""

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)

    def draw(self, seed, start, count):
        n = self.probs.size
        u = uniforms(seed, start, count, stride=max(n, 1))[:, :n]
        hits = u < self.probs[None, :]
        weights = 1 << np.arange(n, dtype=object)
        return [int(np.sum(weights[row])) if row.any() else 0 for row in hits]

    def explicit(self, guard=SCENARIO_GUARD):
        n = self.probs.size
        if 2**n > guard:
            raise TooLarge("independent sampler support exceeds the guard")
        probs = {}
        for mask in range(2**n):
            p = Fraction(1)
            for j in range(n):
                pj = Fraction(float(self.probs[j]))
                p *= pj if mask >> j & 1 else 1 - pj
            if p > 0:
                probs[mask] = p
        return ExplicitDistribution.from_mapping(probs)


class CallableSampler:
    """Wrap ``fn(seed, index) -> mask``."""

    def __init__(self, fn: Callable[[int, int], int]):
        self.fn = fn

    def draw(self, seed, start, count):
        return [int(self.fn(seed, i)) for i in range(start, start + count)]


@dataclass
class CentralDistribution:
    """Sampling access to the central distribution, plus its table when known."""

    sampler: object = None
    explicit: ExplicitDistribution | None = None

    def __post_init__(self):
        if self.sampler is None:
            if self.explicit is None:
                raise ValueError("need a sampler or an explicit support")
            self.sampler = ExplicitSampler(self.explicit)

    @classmethod
    def from_explicit(cls, dist):
        return cls(ExplicitSampler(dist), dist)

    def draw(self, seed, start, count):
        return self.sampler.draw(seed, start, count)


def empirical_estimate(center: CentralDistribution, N: int, seed: int) -> ExplicitDistribution:
    if N < 1:
        raise ValueError("N must be positive")
    draws = center.draw(seed, 0, N)
    counts = {}
    for s in draws:
        counts[s] = counts.get(s, 0) + 1
    return ExplicitDistribution.from_mapping({s: Fraction(c, N) for s, c in counts.items()})


@dataclass
class AmbiguityBall:
    """``kind`` is "wasserstein" (then ``metric`` is a ScenarioMetric) or "linf"."""

    center: CentralDistribution
    r: float
    kind: str = "wasserstein"
    metric: ScenarioMetric | None = None

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("radius must be nonnegative")
        if self.kind == "linf":
            self.r = min(float(self.r), 1.0)
        elif self.kind == "wasserstein":
            if self.metric is None:
                self.metric = ScenarioMetric.discrete()
        else:
            raise ValueError(f"unknown ball kind {self.kind!r}")

    @property
    def explicit(self):
        return self.center.explicit


def wasserstein_distance(p, q, metric: ScenarioMetric) -> float:
    if not isinstance(p, ExplicitDistribution):
        p = ExplicitDistribution.from_mapping(dict(p))
    if not isinstance(q, ExplicitDistribution):
        q = ExplicitDistribution.from_mapping(dict(q))
    P, Q = p.support, q.support
    np_, nq = len(P), len(Q)
    cost = np.array([[metric.distance(a, b) for b in Q] for a in P]).reshape(-1)
    rows = np.zeros((np_ + nq, np_ * nq))
    for i in range(np_):
        rows[i, i * nq : (i + 1) * nq] = 1.0
    for j in range(nq):
        rows[np_ + j, j::nq] = 1.0
    rhs = np.concatenate([p.weights, q.weights])
    res = lpmod.solve_lp(lpmod.LinearProgram(cost, rows, [lpmod.EQ] * (np_ + nq), rhs))
    if not res.optimal:
        raise InfeasibleMarginals(f"transport LP is {res.status.value}")
    return max(res.value, 0.0)


# ---------------------------------------------------------------- problem contract


@dataclass
class SecondStage:
    """Second-stage LP for one scenario: min cost.z s.t. matrix z (rel) base + jac x."""

    cost: np.ndarray
    matrix: np.ndarray
    relations: list
    base: np.ndarray
    jac: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def lp_at(self, x) -> lpmod.LinearProgram:
        rhs = self.base + self.jac @ np.asarray(x, dtype=float) if self.base.size else self.base
        return lpmod.LinearProgram(self.cost, self.matrix, self.relations, rhs, "min", self.lower, self.upper)


@dataclass
class Rounding:
    """Integral first-stage vector with the declared locality factor."""

    x: np.ndarray
    rho: float
    ratios: dict = field(default_factory=dict)

    @property
    def rho_emp(self):
        return max(self.ratios.values(), default=1.0)


@dataclass
class Recourse:
    """Integral second-stage actions for one scenario and their cost."""

    actions: object
    cost: float


class TwoStageProblem:
    """Shared machinery for the concrete problem families.

    Subclasses set ``n_ground``, ``c``, ``lam`` and implement
    ``_second_stage(A)``; rounding hooks have covering-style defaults.
    Second-stage values are cached by (x bytes, scenario).
    """

    family = "abstract"
    monotone = True
    k: int | None = None
    alpha = 1.0  # deterministic rounding factor
    rho = 1.0  # local rounding factor

    def __init__(self):
        self._ss_cache = {}
        self._g_cache = {}
        self.lp_solves = 0

    # --- dimensions and constants
    @property
    def m(self) -> int:
        return int(self.c.size)

    @property
    def space(self) -> ScenarioSpace:
        return ScenarioSpace(self.n_ground, self.k)

    @property
    def universe(self) -> int:
        return full_mask(self.n_ground)

    @property
    def R(self) -> float:
        return math.sqrt(self.m)

    @property
    def V(self) -> float:
        return 0.5

    @property
    def K(self) -> float:
        return float(self.lam * np.linalg.norm(self.c))

    def cost_bound(self) -> float:
        """Upper bound on any g(x, A)."""
        raise NotImplementedError

    def cost_floor(self) -> float:
        """Lower bound on c.x + g(x, A) over x in P for every non-null scenario A."""
        raise NotImplementedError

    def tau(self, metric: ScenarioMetric) -> float:
        gran = 1.0 if metric.kind == "discrete" else metric.sigma_min_positive()
        return self.cost_bound() / gran if gran > 0 else self.cost_bound()

    def default_metric(self) -> ScenarioMetric:
        return ScenarioMetric.discrete()

    # --- second stage
    def second_stage(self, A: int) -> SecondStage:
        ss = self._ss_cache.get(A)
        if ss is None:
            ss = self._second_stage(A)
            self._ss_cache[A] = ss
        return ss

    def second_stage_lp(self, x, A: int) -> lpmod.LinearProgram:
        return self.second_stage(A).lp_at(x)

    def evaluate(self, x, A: int):
        """Return (g(x, A), subgradient of g(., A) at x)."""
        x = np.ascontiguousarray(x, dtype=float)
        key = (x.tobytes(), A)
        hit = self._g_cache.get(key)
        if hit is not None:
            return hit
        ss = self.second_stage(A)
        if ss.cost.size == 0 or ss.matrix.shape[0] == 0:
            out = (0.0, np.zeros(self.m))
        else:
            res = lpmod.solve_lp(ss.lp_at(x))
            self.lp_solves += 1
            if not res.optimal:
                raise lpmod.NumericalFailure(f"second-stage LP {res.status.value} for scenario {A}")
            out = (max(res.value, 0.0), ss.jac.T @ res.dual)
        if len(self._g_cache) > 400000:
            self._g_cache.clear()
        self._g_cache[key] = out
        return out

    def g(self, x, A: int) -> float:
        return self.evaluate(x, A)[0]

    def subgradient(self, x, A: int) -> np.ndarray:
        return self.evaluate(x, A)[1]

    def clear_cache(self):
        self._g_cache.clear()

    # --- rounding hooks
    def local_round(self, x) -> Rounding:
        raise NotImplementedError

    def restricted_local_round(self, x, scenarios) -> Rounding:
        return self.local_round(x)

    def deterministic_round(self, x, A: int) -> Recourse:
        raise NotImplementedError

    def recourse_cost(self, x, A: int) -> float:
        return self.deterministic_round(x, A).cost

    def check_locality(self, x, rounding: Rounding, scenarios, tol=1e-7):
        """Record per-scenario ratios (integral recourse at x~) / g(x, A)."""
        x = np.asarray(x, dtype=float)
        first = float(self.c @ x)
        ok = float(self.c @ rounding.x) <= rounding.rho * first + tol
        rounding.ratios["first-stage"] = float(self.c @ rounding.x) / first if first > tol else (
            1.0 if self.c @ rounding.x <= tol else math.inf
        )
        for A in scenarios:
            g = self.g(x, A)
            cost = self.recourse_cost(rounding.x, A)
            rounding.ratios[A] = cost / g if g > tol else (1.0 if cost <= tol else math.inf)
            ok &= cost <= rounding.rho * g + tol * (1 + g)
        return ok
