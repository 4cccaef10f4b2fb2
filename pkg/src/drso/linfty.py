"""L-infinity balls: free-mass estimation, the proxy objective and its solver.

Around a center p, an adversary in the L-infinity ball of radius r can add
at most r to any scenario and can remove at most min(p_A, r) from A. The
total removable ("free") mass Pfree = sum_A min(p_A, r) bounds how much can
be moved. The proxy objective

    c.x + E_p[g(x, A)] + max over {0 <= q_A <= r, sum q <= Pfree} of sum q_A g(x, A)

over-estimates the worst case by at most a factor 2(1+eps').
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CentralDistribution, members, split_seed
from .ellipsoid import minimize_convex, subgradient_slack
from .errors import NotMonotone

DEFAULT_SAMPLE_CAP = 200_000


@dataclass
class FreeMassEstimate:
    value: float
    frequent: tuple
    estimates: dict
    delta: float
    r: float
    eps: float
    samples: tuple = (0, 0)


def free_mass(p, r):
    """Exact Pfree for an explicit distribution."""
    return float(min(1.0, sum(min(float(q), r) for q in p.probs)))


def frequent_sample_size(r, delta):
    return max(1, math.ceil((2 / r**2) * math.log(2 / (delta * r))))


def refine_sample_size(r, eps, delta, F):
    t = eps * r / (4 * max(F, 1))
    return max(1, math.ceil(math.log(2 * max(F, 1) / delta) / (2 * t * t)))


def _counts(draws):
    out = {}
    for s in draws:
        out[s] = out.get(s, 0) + 1
    return out


def estimate_free_mass(center: CentralDistribution, r, eps, delta, seed=0, max_samples=None):
    """Two sampling rounds: find the frequent scenarios, then estimate their mass.

    Scenarios seen with frequency >= r/2 in the first round are frequent;
    every other scenario is assumed to have mass below r. The second round
    estimates each frequent mass p_A, and the free mass is taken as
    sum min(p_A, r) + (1 - sum p_A) plus a cushion eps*r/2.
    """
    if not 0 < r:
        raise ValueError("r must be positive")
    r = min(r, 1.0)
    N1 = frequent_sample_size(r, delta)
    first = _counts(center.draw(split_seed(seed, 1), 0, N1))
    freq = tuple(sorted(A for A, c in first.items() if c / N1 >= r / 2))
    N2 = refine_sample_size(r, eps, delta, len(freq))
    if max_samples is not None:
        N2 = min(N2, max_samples)
    second = _counts(center.draw(split_seed(seed, 2), 0, N2))
    est = {A: second.get(A, 0) / N2 for A in freq}
    q_free = sum(min(v, r) for v in est.values()) + (1.0 - sum(est.values()))
    value = min(q_free + eps * r / 2, 1.0)
    return FreeMassEstimate(value, freq, est, delta, r, eps, (N1, N2))


def exact_free_mass_estimate(p, r, eps=0.0):
    """The estimate an oracle with exact probabilities would return."""
    value = min(free_mass(p, r) + eps * min(r, 1.0) / 2, 1.0)
    return FreeMassEstimate(value, tuple(p.support), dict(zip(p.support, map(float, p.probs))), 0.0, r, eps)


def good_k_sequence(problem, x, k_inf):
    """The k_inf costliest scenarios in non-increasing order of g(x, .).

    Start from the full set; each later pick is the costliest scenario
    obtained by dropping one element from an earlier pick. Monotonicity of
    g makes this exact. Ties go to the smaller bitmask.
    """
    if not problem.monotone:
        raise NotMonotone("good k-sequences need monotone second-stage costs")
    if problem.k is not None:
        raise ValueError("good k-sequences need the all-subsets scenario collection")
    total = 2**problem.n_ground
    k_inf = min(int(k_inf), total)
    U = problem.universe
    chosen = [U]
    values = [problem.g(x, U)]
    seen = {U}
    frontier = {}
    while len(chosen) < k_inf:
        for j in members(chosen[-1]):
            B = chosen[-1] & ~(1 << j)
            if B not in seen and B not in frontier:
                frontier[B] = problem.g(x, B)
        B = min(frontier, key=lambda s: (-frontier[s], s))
        chosen.append(B)
        values.append(frontier.pop(B))
        seen.add(B)
    return chosen, values


@dataclass
class KPolytopeSolution:
    scenarios: list
    weights: np.ndarray
    value: float


def optimal_q(free, r, scenarios, values):
    """Greedy fill of max sum q_A g_A over {0 <= q <= r, sum q <= free}."""
    r = min(r, 1.0)
    k = min(math.ceil(free / r - 1e-12), len(scenarios)) if r > 0 else 0
    w = np.zeros(k)
    left = free
    for i in range(k):
        w[i] = min(r, max(left, 0.0))
        left -= w[i]
    return KPolytopeSolution(list(scenarios[:k]), w, float(w @ np.asarray(values[:k], dtype=float)))


def _k_solution(problem, x, est: FreeMassEstimate):
    k = min(math.ceil(est.value / est.r - 1e-12), 2**problem.n_ground)
    seq, vals = good_k_sequence(problem, x, max(k, 1))
    return optimal_q(est.value, est.r, seq, vals)


def _expectation(problem, x, center, fn, samples, seed):
    if center.explicit is not None:
        p = center.explicit
        return sum(w * fn(A) for A, w in zip(p.support, p.weights))
    draws = _counts(center.draw(seed, 0, samples))
    return sum(c * fn(A) for A, c in draws.items()) / samples


@dataclass
class ProxyTerms:
    first_stage: float
    expectation: float
    kmax: float
    q: KPolytopeSolution

    @property
    def total(self):
        return self.first_stage + self.expectation + self.kmax


def proxy_terms(problem, x, center, est, samples=10_000, seed=0):
    x = np.asarray(x, dtype=float)
    q = _k_solution(problem, x, est)
    e = _expectation(problem, x, center, lambda A: problem.g(x, A), samples, seed)
    return ProxyTerms(float(problem.c @ x), float(e), q.value, q)


def proxy_value(problem, x, center, est, samples=10_000, seed=0):
    """c.x + E_p[g(x, A)] + K-polytope maximum; exact expectation for explicit centers."""
    return proxy_terms(problem, x, center, est, samples, seed).total


def subgradient_sample_size(lam, omega, m, delta):
    return max(1, math.ceil((2 * lam * lam / (omega * omega)) * math.log(2 * m / delta)))


def proxy_subgradient(problem, x, center, est, omega, delta, seed=0, max_samples=DEFAULT_SAMPLE_CAP):
    """c + d_hat + sum q_A d(x, A), with d_hat shifted down by omega*c/2.

    d_hat is the exact mean of the scenario subgradients for explicit
    centers and a sample mean otherwise.
    """
    x = np.asarray(x, dtype=float)
    c = problem.c
    q = _k_solution(problem, x, est)
    if center.explicit is not None:
        p = center.explicit
        dbar = sum(w * problem.subgradient(x, A) for A, w in zip(p.support, p.weights))
    else:
        n = min(subgradient_sample_size(problem.lam, omega, problem.m, delta), max_samples)
        draws = _counts(center.draw(seed, 0, n))
        dbar = sum(cnt * problem.subgradient(x, A) for A, cnt in draws.items()) / n
    out = c + dbar - omega * c / 2
    for A, w in zip(q.scenarios, q.weights):
        if w:
            out = out + w * problem.subgradient(x, A)
    return out


@dataclass
class LinftySolution:
    x: np.ndarray
    value: float
    estimate: FreeMassEstimate | None
    iterations: int = 0
    trace: list = field(default_factory=list)


def solve_linfty(problem, center: CentralDistribution, r, eps=0.1, delta=0.1, seed=0, eps_prime=None, max_samples=DEFAULT_SAMPLE_CAP):
    """Minimize the proxy over [0,1]^m with the ellipsoid routine."""
    if eps > 1 / 3 + 1e-12:
        raise ValueError("eps must be at most 1/3")
    m = problem.m
    x0 = np.zeros(m)
    top = problem.g(x0, problem.universe)
    if top <= 0:
        return LinftySolution(x0, 0.0, None)
    r = min(r, 1.0)
    est = estimate_free_mass(center, r, eps if eps_prime is None else eps_prime, delta, split_seed(seed, 0), max_samples)
    lb = r * top / problem.lam
    kappa = eps * lb
    Kt = (2 * problem.lam + 1) * float(np.linalg.norm(problem.c))
    omega = subgradient_slack(m, problem.R, problem.V, Kt, kappa, eps)
    calls = [0]

    def oracle(x):
        calls[0] += 1
        s = split_seed(seed, 3, calls[0])
        return proxy_value(problem, x, center, est, seed=s), proxy_subgradient(problem, x, center, est, omega, delta, s, max_samples)

    res = minimize_convex(oracle, m, problem.R, problem.V, Kt, eps, kappa)
    return LinftySolution(res.x, res.value, est, res.iterations, res.trace)
