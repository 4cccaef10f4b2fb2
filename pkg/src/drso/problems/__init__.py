"""Concrete problem families, seeded generators and small fixtures."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from ..core import ExplicitDistribution, mask_of
from .covering import EdgeCoverInstance, SetCoverInstance, VertexCoverInstance
from .facility import FacilityLocationInstance
from .steiner import SteinerInstance, monotone_reduction

FAMILIES = ("set_cover", "vertex_cover", "edge_cover", "facility_location", "steiner")

__all__ = [
    "EdgeCoverInstance",
    "FacilityLocationInstance",
    "SetCoverInstance",
    "SteinerInstance",
    "VertexCoverInstance",
    "FAMILIES",
    "generate",
    "random_center",
    "monotone_reduction",
    "vc3",
    "vc3_center",
    "fl2",
    "steiner_path",
]


def _halves(rng, lo, hi, size):
    return rng.integers(2 * lo, 2 * hi + 1, size=size) / 2.0


def _connected_graph(rng, n, extra):
    """Random spanning tree plus ``extra`` random additional edges."""
    edges = set()
    order = rng.permutation(n)
    for i in range(1, n):
        u, v = int(order[i]), int(order[rng.integers(0, i)])
        edges.add((min(u, v), max(u, v)))
    pairs = [p for p in itertools.combinations(range(n), 2) if p not in edges]
    rng.shuffle(pairs)
    edges.update(pairs[:extra])
    return sorted(edges)


def _points_metric(rng, n, scale=10, distinct=False):
    if distinct:
        cells = rng.choice((scale + 1) ** 2, size=n, replace=False)
        pts = np.stack([cells // (scale + 1), cells % (scale + 1)], axis=1).astype(float)
    else:
        pts = rng.integers(0, scale + 1, size=(n, 2)).astype(float)
    D = np.round(np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)), 6)
    # rounding can break the triangle inequality by 1e-6; restore it with shortest paths
    for a in range(n):
        D = np.minimum(D, D[:, [a]] + D[[a], :])
    return D, pts


SIZE_KEYS = {
    "set_cover": ("elements", "sets"),
    "vertex_cover": ("vertices", "extra_edges"),
    "edge_cover": ("vertices", "extra_edges"),
    "facility_location": ("clients", "facilities", "anchor"),
    "steiner": ("nodes",),
}


def generate(family, seed, size=None, k=None):
    """Seeded random instance of ``family``; ``size`` keys depend on the family.

    ``n`` is an alias for the main count: elements, vertices, clients or nodes.
    """
    rng = np.random.default_rng(seed)
    size = dict(size or {})
    if family in SIZE_KEYS:
        if "n" in size:
            size.setdefault(SIZE_KEYS[family][0], size.pop("n"))
        unknown = set(size) - set(SIZE_KEYS[family])
        if unknown:
            raise ValueError(f"unknown size keys for {family}: {sorted(unknown)}")
    if family == "set_cover":
        n = size.get("elements", int(rng.integers(3, 6)))
        m = size.get("sets", int(rng.integers(3, 6)))
        sets = [int(rng.integers(1, 2**n)) for _ in range(m)]
        covered = 0
        for s in sets:
            covered |= s
        for e in range(n):
            if not covered >> e & 1:
                sets[int(rng.integers(0, m))] |= 1 << e
        c = _halves(rng, 1, 4, m)
        c2 = c * _halves(rng, 1, 3, m)
        return SetCoverInstance(n, sets, c, c2, k)
    if family == "vertex_cover":
        nv = size.get("vertices", int(rng.integers(3, 5)))
        edges = _connected_graph(rng, nv, size.get("extra_edges", int(rng.integers(0, 3))))
        c = _halves(rng, 1, 4, nv)
        c2 = c * _halves(rng, 1, 3, nv)
        return VertexCoverInstance(nv, edges, c, c2, k)
    if family == "edge_cover":
        nv = size.get("vertices", int(rng.integers(3, 6)))
        edges = _connected_graph(rng, nv, size.get("extra_edges", int(rng.integers(0, 3))))
        c = _halves(rng, 1, 4, len(edges))
        c2 = c * _halves(rng, 1, 3, len(edges))
        return EdgeCoverInstance(nv, edges, c, c2, k)
    if family == "facility_location":
        nf = size.get("facilities", int(rng.integers(2, 4)))
        nc = size.get("clients", int(rng.integers(2, 5)))
        D, _ = _points_metric(rng, nf + nc)
        f = _halves(rng, 1, 6, nf)
        f2 = f * _halves(rng, 1, 3, nf)
        anchor = 0 if size.get("anchor", True) else None
        return FacilityLocationInstance(D, nf, f, f2, anchor=anchor, k=k)
    if family == "steiner":
        nv = size.get("nodes", int(rng.integers(3, 5)))
        D, _ = _points_metric(rng, nv, distinct=True)
        D = D + (D > 0) * 0.5  # keep distinct points apart
        for a in range(nv):
            D = np.minimum(D, D[:, [a]] + D[[a], :])
        lam = float(_halves(rng, 1, 3, 1)[0])
        return SteinerInstance(D, lam, root=0)
    raise ValueError(f"unknown family {family!r}")


def random_center(problem, seed, support=None):
    """Random explicit distribution over distinct scenarios of ``problem``."""
    rng = np.random.default_rng(seed)
    scen = problem.space.enumerate()
    s = support or int(rng.integers(1, min(4, len(scen)) + 1))
    s = min(s, len(scen))
    picks = sorted(int(v) for v in rng.choice(scen, size=s, replace=False))
    raw = rng.integers(1, 9, size=s)
    return ExplicitDistribution(tuple(picks), tuple(Fraction(int(r), int(raw.sum())) for r in raw))


def vc3(first_cost=2.0, second_cost=2.0):
    """Triangle vertex cover; edges e12, e13, e23 are elements 0, 1, 2."""
    return VertexCoverInstance(3, [(0, 1), (0, 2), (1, 2)], [first_cost] * 3, [second_cost] * 3)


def vc3_center():
    return ExplicitDistribution((mask_of([0]), mask_of([0, 1, 2])), (Fraction(1, 2), Fraction(1, 2)))


def fl2(first_cost=1.0, second_cost=2.0, anchor=None):
    """Facilities at 0 and 10, clients at 0, 5 and 10 on a line."""
    pos = np.array([0.0, 10.0, 0.0, 5.0, 10.0])
    D = np.abs(pos[:, None] - pos[None, :])
    return FacilityLocationInstance(D, 2, [first_cost] * 2, [second_cost] * 2, anchor=anchor)


def steiner_path(lam=2.0):
    """Root s=0, then a=1 and b=2 on a path with unit edges."""
    pos = np.array([0.0, 1.0, 2.0])
    return SteinerInstance(np.abs(pos[:, None] - pos[None, :]), lam, root=0)
