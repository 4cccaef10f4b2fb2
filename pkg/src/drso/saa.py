"""Sample-average approximation driver and the short/long transport split."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .core import SCENARIO_GUARD, AmbiguityBall, ExplicitDistribution, empirical_estimate, split_seed
from .ellipsoid import solve_saa_poly
from .errors import TooLarge
from .gxy import default_oracle


def sample_count(eps, delta, lam, log_X, log_tau_over_kappa, C=4.0):
    """Samples per replicate: C (lam/eps)^2 (log|X| + log(tau/kappa) + ln(1/delta))."""
    for name, v in (("eps", eps), ("delta", delta), ("lam", lam), ("log_X", log_X), ("C", C)):
        if v <= 0:
            raise ValueError(f"{name} must be positive")
    if log_tau_over_kappa < 0:
        raise ValueError("log_tau_over_kappa must be nonnegative")
    return math.ceil(C * (lam / eps) ** 2 * (log_X + log_tau_over_kappa + math.log(1 / delta)))


def default_replicates(eps, delta):
    return max(1, math.ceil((2 / eps) * math.log(1 / delta)))


@dataclass
class SaaConfig:
    eps: float = 0.2
    delta: float = 0.1
    kappa: float = 0.0
    replicates: int | None = None
    samples: int | None = None
    C: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eps <= 1 / 3 + 1e-12:
            raise ValueError("eps must lie in (0, 1/3]")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.replicates is None:
            self.replicates = default_replicates(self.eps, self.delta)
        if self.replicates < 1 or (self.samples is not None and self.samples < 1):
            raise ValueError("replicates and samples must be positive")

    def resolve_samples(self, problem, metric):
        if self.samples is not None:
            return self.samples
        kappa = self.kappa if self.kappa > 0 else self.eps * problem.cost_floor()
        log_tau = max(math.log(max(problem.tau(metric) / kappa, 1.0)), 0.0)
        return sample_count(self.eps, self.delta, problem.lam, problem.m * math.log(2), log_tau, self.C)


@dataclass
class Replicate:
    index: int
    seed: int
    x: np.ndarray
    estimate: float
    support: int


@dataclass
class SaaReport:
    rows: list
    selected: int
    samples: int
    config: SaaConfig = field(repr=False, default=None)

    @property
    def x(self):
        return self.rows[self.selected].x

    @property
    def estimate(self):
        return self.rows[self.selected].estimate

    def seeds(self):
        return [row.seed for row in self.rows]


def poly_solver(problem, p, r, metric, eps=0.1):
    """Default replicate solver: ellipsoid with the problem's exact oracle."""
    sol = solve_saa_poly(problem, p, r, metric, default_oracle(problem, metric), eps=eps)
    return sol.x, sol.estimate


def _solve_one(args):
    problem, ball, N, seed, solver, index = args
    p = empirical_estimate(ball.center, N, seed)
    x, f = solver(problem, p, ball.r, ball.metric)
    return Replicate(index, seed, np.asarray(x, dtype=float), float(f), len(p.support))


def run_saa(problem, ball: AmbiguityBall, config: SaaConfig, solver=None, workers=1):
    """Solve one SAA instance per replicate seed and keep the smallest estimate.

    Replicate i draws from seed split_seed(config.seed, i). ``solver(problem,
    p_hat, r, metric)`` returns (x, estimate).
    """
    if ball.kind != "wasserstein":
        raise ValueError("run_saa handles Wasserstein balls; use linfty.solve_linfty for L-infinity")
    solver = solver or poly_solver
    N = config.resolve_samples(problem, ball.metric)
    jobs = [(problem, ball, N, split_seed(config.seed, i), solver, i) for i in range(config.replicates)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_solve_one, jobs))
    else:
        rows = [_solve_one(j) for j in jobs]
    j = min(range(len(rows)), key=lambda i: (rows[i].estimate, i))
    return SaaReport(rows, j, N, config)


# ---------------------------------------------------------------- short/long split


@dataclass
class ShortLong:
    z_short: float
    z_long_at_zero: float
    threshold: float

    def total(self, first_stage):
        return first_stage + self.z_short + self.z_long_at_zero


def decompose_short_long(problem, x, p: ExplicitDistribution, r, metric, M=None, lam=None, guard=SCENARIO_GUARD):
    """Split transport into short moves (sigma <= M) at x and long moves at x=0.

    The long part may move at most 1/lam of the mass in total. M defaults to
    lam*r.
    """
    lam = problem.lam if lam is None else float(lam)
    M = lam * r if M is None else M
    if problem.space.count() > guard:
        raise TooLarge("scenario collection exceeds the diagnostic guard")
    scen = problem.space.enumerate(guard)
    x = np.asarray(x, dtype=float)
    x0 = np.zeros(problem.m)
    w = p.weights
    short, long_ = [], []
    for a, A in enumerate(p.support):
        for B in scen:
            s = metric.distance(A, B)
            if s <= M + 1e-12:
                short.append(lpmod.TransportColumn(a, B, problem.g(x, B), s))
            long_.append(lpmod.TransportColumn(a, B, problem.g(x0, B), s))
    zs = lpmod.solve_transport_restricted(lpmod.TransportLpSpec(w, short, r)).value
    zl = lpmod.solve_transport_restricted(lpmod.TransportLpSpec(w, long_, r, 1.0 / lam)).value
    return ShortLong(zs, zl, M)


def z_long(problem, p, r, metric, lam=None):
    """z_long at x=0 as a function of the center, for concavity checks."""
    return decompose_short_long(problem, np.zeros(problem.m), p, r, metric, lam=lam).z_long_at_zero
