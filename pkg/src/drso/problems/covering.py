"""Set cover and its vertex-cover and edge-cover specializations."""

from __future__ import annotations

import math

import networkx as nx
import numpy as np

from .. import lp as lpmod
from ..core import Recourse, Rounding, SecondStage, TwoStageProblem, members


class SetCoverInstance(TwoStageProblem):
    """Ground elements must be covered by sets bought now (cost c) or later (cost c2).

    ``sets[S]`` is the bitmask of elements covered by set S.
    """

    family = "set_cover"

    def __init__(self, n_elements, sets, c, c2, k=None):
        super().__init__()
        self.n_ground = int(n_elements)
        self.sets = [int(s) for s in sets]
        self.c = np.asarray(c, dtype=float)
        self.c2 = np.asarray(c2, dtype=float)
        self.k = k
        if len(self.sets) != self.c.size or self.c2.shape != self.c.shape:
            raise ValueError("set list and cost vectors disagree")
        if np.any(self.c < 0) or np.any(self.c2 < 0):
            raise ValueError("costs must be nonnegative")
        covered = 0
        for s in self.sets:
            covered |= s
        if covered != self.universe:
            raise ValueError("some element is not covered by any set")
        pos = self.c > 0
        ratios = self.c2[pos] / self.c[pos]
        self.lam = float(max(1.0, ratios.max(initial=1.0)))
        self.incidence = np.array(
            [[(s >> e) & 1 for s in self.sets] for e in range(self.n_ground)], dtype=float
        ).reshape(self.n_ground, len(self.sets))
        max_set = max((bin(s).count("1") for s in self.sets), default=1)
        self.alpha = sum(1.0 / i for i in range(1, max(max_set, 1) + 1))
        self.rho = 2 * self.alpha

    def cost_bound(self):
        return float(self.c2.sum())

    def cost_floor(self):
        cheap = np.minimum(self.c, self.c2)
        return float(min(cheap[self.incidence[e] > 0].min() for e in range(self.n_ground)))

    def _second_stage(self, A):
        elems = list(members(A))
        if not elems:
            return SecondStage(np.zeros(0), np.zeros((0, 0)), [], np.zeros(0), np.zeros((0, self.m)))
        inc = self.incidence[elems]
        return SecondStage(
            cost=self.c2.copy(),
            matrix=inc,
            relations=[lpmod.GE] * len(elems),
            base=np.ones(len(elems)),
            jac=-inc,
        )

    def coverage(self, x):
        return self.incidence @ np.asarray(x, dtype=float)

    # --- rounding
    def cover(self, elements, costs, fractional=None):
        """Integral cover of ``elements`` (mask); greedy by cost per new element.

        With ``fractional`` given, only sets in its support are used.
        """
        need = int(elements)
        chosen = np.zeros(self.m)
        allowed = np.ones(self.m, dtype=bool) if fractional is None else np.asarray(fractional) > 1e-12
        while need:
            best, best_ratio = -1, math.inf
            for S, mask in enumerate(self.sets):
                if not allowed[S]:
                    continue
                gain = bin(mask & need).count("1")
                if gain and costs[S] / gain < best_ratio - 1e-12:
                    best, best_ratio = S, costs[S] / gain
            chosen[best] = 1.0
            need &= ~self.sets[best]
        return chosen

    def local_round(self, x):
        x = np.asarray(x, dtype=float)
        if np.all((x <= 1e-12) | (x >= 1 - 1e-12)):
            return Rounding(np.round(x), self.rho)
        half = self.coverage(x) >= 0.5 - 1e-12
        target = sum(1 << e for e in np.flatnonzero(half))
        xt = self.cover(target, self.c, np.minimum(2 * x, 1.0))
        return Rounding(xt, self.rho)

    def covered_mask(self, x):
        cov = self.coverage(x)
        return sum(1 << e for e in np.flatnonzero(cov >= 1 - 1e-9))

    def deterministic_round(self, x, A):
        left = A & ~self.covered_mask(x)
        z = self.cover(left, self.c2)
        return Recourse(z, float(self.c2 @ z))


class VertexCoverInstance(SetCoverInstance):
    """Edges are the ground elements; each vertex is a set."""

    family = "vertex_cover"

    def __init__(self, n_vertices, edges, c, c2, k=None):
        self.n_vertices = int(n_vertices)
        self.edges = [tuple(sorted(e)) for e in edges]
        sets = [0] * self.n_vertices
        for idx, (u, v) in enumerate(self.edges):
            sets[u] |= 1 << idx
            sets[v] |= 1 << idx
        super().__init__(len(self.edges), sets, c, c2, k)
        self.alpha = 2.0
        self.rho = 4.0

    def cover(self, elements, costs, fractional=None):
        """Threshold rounding of a fractional cover; solves the cover LP when none is given."""
        if fractional is None:
            fractional = self._cover_lp(elements, costs)
        out = np.zeros(self.m)
        for e in members(elements):
            u, v = self.edges[e]
            if fractional[u] >= 0.5 - 1e-9:
                out[u] = 1.0
            if fractional[v] >= 0.5 - 1e-9:
                out[v] = 1.0
        return out

    def _cover_lp(self, elements, costs):
        elems = list(members(elements))
        if not elems:
            return np.zeros(self.m)
        res = lpmod.solve_lp(
            lpmod.LinearProgram(costs, self.incidence[elems], [lpmod.GE] * len(elems), np.ones(len(elems)))
        )
        return res.primal

    def local_round(self, x):
        x = np.asarray(x, dtype=float)
        half = self.coverage(x) >= 0.5 - 1e-12
        target = sum(1 << e for e in np.flatnonzero(half))
        # 2x is a fractional cover of the half-covered edges
        xt = self.cover(target, self.c, np.minimum(2 * x, 1.0))
        return Rounding(xt, self.rho)


class EdgeCoverInstance(SetCoverInstance):
    """Vertices are the ground elements; each edge is a set."""

    family = "edge_cover"

    def __init__(self, n_vertices, edges, c, c2, k=None):
        self.edges = [tuple(sorted(e)) for e in edges]
        sets = [(1 << u) | (1 << v) for u, v in self.edges]
        super().__init__(n_vertices, sets, c, c2, k)
        self.alpha = 1.5
        self.rho = 3.0

    def cover(self, elements, costs, fractional=None):
        """Minimum-cost edge cover of the vertex set ``elements``.

        Every vertex first takes its cheapest incident edge; a maximum-weight
        matching then merges pairs of such choices into single shared edges.
        With ``fractional`` given, only edges in its support are used.
        """
        need = list(members(elements))
        out = np.zeros(self.m)
        if not need:
            return out
        allowed = np.ones(self.m, dtype=bool) if fractional is None else np.asarray(fractional) > 1e-12
        best = {}
        for v in need:
            inc = [i for i, (a, b) in enumerate(self.edges) if v in (a, b) and allowed[i]]
            best[v] = min(inc, key=lambda i: (costs[i], i))
        G = nx.Graph()
        inside = set(need)
        for i, (a, b) in enumerate(self.edges):
            if a in inside and b in inside and allowed[i]:
                gain = costs[best[a]] + costs[best[b]] - costs[i]
                if gain > 1e-12:
                    if not G.has_edge(a, b) or G[a][b]["weight"] < gain:
                        G.add_edge(a, b, weight=gain, index=i)
        matched = set()
        for a, b in nx.max_weight_matching(G):
            out[G[a][b]["index"]] = 1.0
            matched |= {a, b}
        for v in need:
            if v not in matched:
                out[best[v]] = 1.0
        return out
