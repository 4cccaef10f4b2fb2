"""Two-stage rooted Steiner tree with a monotone flow relaxation.

Nodes other than the root form the ground set: element j is node ``j`` if
``j < root`` and node ``j + 1`` otherwise. Each terminal sends one unit of
flow to the root; flow may ride stage-II edges first and stage-I edges
afterwards, never the other way round.
"""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np

from .. import lp as lpmod
from ..core import Recourse, Rounding, ScenarioMetric, SecondStage, TwoStageProblem, members


class SteinerInstance(TwoStageProblem):
    family = "steiner"

    def __init__(self, costs, lam, root=0):
        super().__init__()
        C = np.asarray(costs, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("edge costs must form a square matrix")
        if np.any(C < 0) or not np.allclose(C, C.T):
            raise ValueError("edge costs must be symmetric and nonnegative")
        for j in range(C.shape[0]):
            if np.any(C[j][:, None] > C[j][None, :] + C + 1e-9):
                raise ValueError("edge costs violate the triangle inequality")
        self.cost = C
        self.nv = C.shape[0]
        self.root = int(root)
        self.lam = float(lam)
        if self.lam < 1:
            raise ValueError("inflation must be at least 1")
        self.edge_list = list(itertools.combinations(range(self.nv), 2))
        self.edge_index = {e: i for i, e in enumerate(self.edge_list)}
        self.c = np.array([C[u, v] for u, v in self.edge_list])
        self.c2 = self.lam * self.c
        self.n_ground = self.nv - 1
        self.nodes = [v for v in range(self.nv) if v != self.root]
        self.arcs = [(u, v) for u, v in self.edge_list] + [(v, u) for u, v in self.edge_list]
        self.alpha = 2.0
        self.rho = 10.0

    def node_of(self, j):
        return self.nodes[j]

    def edge(self, u, v):
        return self.edge_index[(min(u, v), max(u, v))]

    def cost_bound(self):
        return float(self.c2.sum())

    def cost_floor(self):
        C = self.cost + np.diag(np.full(self.nv, np.inf))
        return float(min(C[v].min() for v in self.nodes))

    def terminal_metric(self):
        idx = self.nodes
        return ScenarioMetric.asym_inf(self.cost[np.ix_(idx, idx)], self.cost[self.root, idx])

    def _second_stage(self, A):
        terms = [self.node_of(j) for j in members(A)]
        nE, nA = len(self.edge_list), len(self.arcs)
        if not terms:
            return SecondStage(np.zeros(0), np.zeros((0, 0)), [], np.zeros(0), np.zeros((0, self.m)))
        per = 2 * nA  # stage-I arc flows then stage-II arc flows
        nvar = nE + per * len(terms)
        cost = np.concatenate([self.c2, np.zeros(per * len(terms))])
        rows, rels, base, jrows = [], [], [], []

        def new_row():
            rows.append(np.zeros(nvar))
            jrows.append(np.zeros(nE))
            return rows[-1], jrows[-1]

        for t, v in enumerate(terms):
            off = nE + t * per
            for node in range(self.nv):
                if node == self.root:
                    continue
                row, _ = new_row()
                for a, (p, q) in enumerate(self.arcs):
                    if p == node:
                        row[off + a] += 1.0
                        row[off + nA + a] += 1.0
                    if q == node:
                        row[off + a] -= 1.0
                        row[off + nA + a] -= 1.0
                rels.append(lpmod.EQ)
                base.append(1.0 if node == v else 0.0)
            for a, (p, q) in enumerate(self.arcs):
                e = self.edge(p, q)
                row, jr = new_row()
                row[off + a] = 1.0
                jr[e] = 1.0
                rels.append(lpmod.LE)
                base.append(0.0)
                row, _ = new_row()
                row[off + nA + a] = 1.0
                row[e] = -1.0
                rels.append(lpmod.LE)
                base.append(0.0)
            for node in range(self.nv):
                if node in (self.root, v):
                    continue
                # stage-I flow entering a node must leave it on stage-I edges
                row, _ = new_row()
                for a, (p, q) in enumerate(self.arcs):
                    if q == node:
                        row[off + a] += 1.0
                    if p == node:
                        row[off + a] -= 1.0
                rels.append(lpmod.LE)
                base.append(0.0)
        return SecondStage(cost, np.array(rows), rels, np.array(base), np.array(jrows))

    # --- integral pieces
    def _tree_nodes(self, x):
        """Nodes connected to the root through stage-I edges of x."""
        G = nx.Graph()
        G.add_node(self.root)
        for i, (u, v) in enumerate(self.edge_list):
            if x[i] >= 1 - 1e-9:
                G.add_edge(u, v)
        return nx.node_connected_component(G, self.root)

    def _contracted_distances(self, x):
        W = self.lam * self.cost.copy()
        for i, (u, v) in enumerate(self.edge_list):
            if x[i] >= 1 - 1e-9:
                W[u, v] = W[v, u] = 0.0
        for k in range(self.nv):
            W = np.minimum(W, W[:, [k]] + W[[k], :])
        return W

    def deterministic_round(self, x, A):
        """Minimum spanning tree over the root's stage-I component and the terminals."""
        x = np.asarray(x, dtype=float)
        tree = self._tree_nodes(x)
        terms = [self.node_of(j) for j in members(A)]
        terms = [v for v in terms if v not in tree]
        if not terms:
            return Recourse([], 0.0)
        W = self._contracted_distances(x)
        pts = [self.root] + terms
        G = nx.Graph()
        for a, b in itertools.combinations(range(len(pts)), 2):
            G.add_edge(a, b, weight=W[pts[a], pts[b]])
        T = nx.minimum_spanning_tree(G)
        total = sum(d["weight"] for _, _, d in T.edges(data=True))
        return Recourse([(pts[a], pts[b]) for a, b in T.edges()], float(total))

    def _as_tree(self, nodes_edges):
        """Minimum spanning forest of the chosen edges, restricted to the root's component."""
        G = nx.Graph()
        G.add_node(self.root)
        for i in nodes_edges:
            u, v = self.edge_list[i]
            G.add_edge(u, v, weight=self.c[i])
        comp = nx.node_connected_component(G, self.root)
        T = nx.minimum_spanning_tree(G.subgraph(comp))
        out = np.zeros(self.m)
        for u, v in T.edges():
            out[self.edge(u, v)] = 1.0
        return out

    def local_round(self, x):
        return self.restricted_local_round(x, [self.universe])

    def restricted_local_round(self, x, scenarios):
        """Threshold candidates kept on the root's component; best measured ratio wins.

        This is a heuristic: the locality factor is measured on ``scenarios``
        and reported, not guaranteed.
        """
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        cands = [np.zeros(self.m)]
        for theta in sorted(set(np.round(x[x > 1e-9], 12).tolist()) | {0.5}, reverse=True):
            cands.append(self._as_tree(np.flatnonzero(x >= theta - 1e-12)))
        best, best_ratio = None, np.inf
        seen = set()
        for xt in cands:
            key = xt.tobytes()
            if key in seen:
                continue
            seen.add(key)
            r = Rounding(xt, self.rho)
            self.check_locality(x, r, scenarios)
            ratio = r.rho_emp
            if ratio < best_ratio - 1e-12:
                best, best_ratio = r, ratio
        return best

    def nonmonotone_integral_cost(self, x, A):
        """Exact cheapest stage-II edge set connecting A to the root when x's edges are free."""
        x = np.asarray(x, dtype=float)
        W = self._contracted_distances(x)
        terms = [self.node_of(j) for j in members(A)]
        if not terms:
            return 0.0
        # a Steiner tree on the contracted metric; enumerate Steiner nodes
        others = [v for v in range(self.nv) if v != self.root and v not in terms]
        best = np.inf
        for r in range(len(others) + 1):
            for extra in itertools.combinations(others, r):
                pts = [self.root] + terms + list(extra)
                G = nx.Graph()
                for a, b in itertools.combinations(pts, 2):
                    G.add_edge(a, b, weight=W[a, b])
                T = nx.minimum_spanning_tree(G)
                best = min(best, sum(d["weight"] for _, _, d in T.edges(data=True)))
        return float(best)

    def monotone_integral_cost(self, xt, A):
        """Exact cheapest monotone completion of a stage-I tree containing the root.

        With such a tree, contracting it into the root turns any Steiner tree
        of the contracted metric into monotone paths, so the two costs agree.
        """
        return self.nonmonotone_integral_cost(xt, A)


def monotone_reduction(inst: SteinerInstance, xbar):
    """Turn an integral stage-I edge set into a tree containing the root.

    Components are visited in order of their distance to the growing root
    tree. A component is attached by its cheapest connection when that
    connection costs at most the component's own edges; otherwise it is
    dropped. The result costs at most twice the input.
    """
    xbar = np.asarray(xbar, dtype=float)
    G = nx.Graph()
    G.add_nodes_from(range(inst.nv))
    for i, (u, v) in enumerate(inst.edge_list):
        if xbar[i] >= 1 - 1e-9:
            G.add_edge(u, v)
    comps = [set(c) for c in nx.connected_components(G) if len(c) > 1 or inst.root in c]
    tree = next(c for c in comps if inst.root in c)
    rest = [c for c in comps if inst.root not in c]
    chosen = [i for i, (u, v) in enumerate(inst.edge_list) if xbar[i] >= 1 - 1e-9 and u in tree]
    while rest:

        def link(comp):
            best = min((inst.cost[a, b], a, b) for a in comp for b in tree)
            return best

        rest.sort(key=lambda comp: (link(comp)[0], min(comp)))
        comp = rest.pop(0)
        dist, a, b = link(comp)
        own = [i for i, (u, v) in enumerate(inst.edge_list) if xbar[i] >= 1 - 1e-9 and u in comp]
        own_cost = float(inst.c[own].sum())
        if dist <= own_cost + 1e-12:
            chosen += own + [inst.edge(a, b)]
            tree |= comp
    return inst._as_tree(chosen)
