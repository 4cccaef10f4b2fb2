"""Two-stage uncapacitated facility location; clients form the ground set."""

from __future__ import annotations

import itertools

import numpy as np

from .. import lp as lpmod
from ..core import Recourse, Rounding, ScenarioMetric, SecondStage, TwoStageProblem, members

EXACT_FACILITY_LIMIT = 12


class FacilityLocationInstance(TwoStageProblem):
    """``dist`` is a metric over facilities followed by clients.

    Facility i costs ``f[i]`` in stage I and ``f2[i]`` in stage II; a client
    in the realized scenario pays its distance to the facility serving it.
    """

    family = "facility_location"

    def __init__(self, dist, n_facilities, f, f2, anchor=None, k=None):
        super().__init__()
        D = np.asarray(dist, dtype=float)
        nf = int(n_facilities)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] <= nf:
            raise ValueError("distance matrix must be square over facilities and clients")
        if np.any(D < 0) or not np.allclose(D, D.T):
            raise ValueError("distances must be symmetric and nonnegative")
        for j in range(D.shape[0]):
            if np.any(D[j][:, None] > D[j][None, :] + D + 1e-9):
                raise ValueError("distances violate the triangle inequality")
        self.D = D
        self.nf = nf
        self.n_ground = D.shape[0] - nf
        self.d = D[:nf, nf:]
        self.c = np.asarray(f, dtype=float)
        self.f2 = np.asarray(f2, dtype=float)
        if self.c.shape != (nf,) or self.f2.shape != (nf,):
            raise ValueError("facility cost vectors have the wrong length")
        if np.any(self.c < 0) or np.any(self.f2 < 0):
            raise ValueError("costs must be nonnegative")
        self.anchor = anchor  # index into dist rows, or None
        self.k = k
        pos = self.c > 0
        self.lam = float(max(1.0, (self.f2[pos] / self.c[pos]).max(initial=1.0)))
        self.alpha = 1.488 if nf <= EXACT_FACILITY_LIMIT else 6.0
        self.rho = 5.488

    def cost_bound(self):
        return float(self.f2.sum() + self.d.sum())

    def cost_floor(self):
        return float((self.d + np.minimum(self.c, self.f2)[:, None]).min(axis=0).min())

    def client_metric(self):
        C = self.D[self.nf :, self.nf :]
        anchor = None if self.anchor is None else self.D[self.anchor, self.nf :]
        return ScenarioMetric.asym_inf(C, anchor)

    def _second_stage(self, A):
        cl = list(members(A))
        nf, na = self.nf, len(cl)
        if not na:
            return SecondStage(np.zeros(0), np.zeros((0, 0)), [], np.zeros(0), np.zeros((0, self.m)))
        nv = nf + nf * na  # y_i then w_ij (client-major)
        cost = np.concatenate([self.f2, self.d[:, cl].T.reshape(-1)])
        rows = na + nf * na
        M = np.zeros((rows, nv))
        base = np.zeros(rows)
        jac = np.zeros((rows, nf))
        rel = [lpmod.GE] * na + [lpmod.LE] * (nf * na)
        for t in range(na):
            M[t, nf + t * nf : nf + (t + 1) * nf] = 1.0
            base[t] = 1.0
        r = na
        for t in range(na):
            for i in range(nf):
                M[r, nf + t * nf + i] = 1.0
                M[r, i] = -1.0
                jac[r, i] = 1.0
                r += 1
        return SecondStage(cost, M, rel, base, jac)

    # --- integral recourse
    def _assign_cost(self, open_mask, cl):
        d = self.d[open_mask][:, cl]
        return float(d.min(axis=0).sum())

    def deterministic_round(self, x, A):
        cl = list(members(A))
        x = np.asarray(x, dtype=float)
        free = x >= 1 - 1e-9
        if not cl:
            return Recourse(np.zeros(self.nf), 0.0)
        if self.nf <= EXACT_FACILITY_LIMIT:
            best, best_open = np.inf, None
            paid = np.flatnonzero(~free)
            for r in range(len(paid) + 1):
                for extra in itertools.combinations(paid, r):
                    opened = free.copy()
                    opened[list(extra)] = True
                    if not opened.any():
                        continue
                    val = float(self.f2[list(extra)].sum()) + self._assign_cost(opened, cl)
                    if val < best - 1e-12:
                        best, best_open = val, np.array(extra, dtype=int)
            y = np.zeros(self.nf)
            y[best_open] = 1.0
            return Recourse(y, best)
        return self.filtering_round(x, A)

    def filtering_round(self, x, A):
        """Filter each client's fractional assignment to radius 2*C_j, cluster, open cheapest."""
        cl = list(members(A))
        nf = self.nf
        res = lpmod.solve_lp(self.second_stage_lp(x, A))
        w = res.primal[nf:].reshape(len(cl), nf)
        Cj = (w * self.d[:, cl].T).sum(axis=1)
        free = np.asarray(x) >= 1 - 1e-9
        fcost = np.where(free, 0.0, self.f2)
        opened = free.copy()
        order = sorted(range(len(cl)), key=lambda t: (Cj[t], t))
        claimed = np.zeros(nf, dtype=bool)
        for t in order:
            ball = self.d[:, cl[t]] <= 2 * Cj[t] + 1e-9
            if np.any(ball & claimed):
                continue
            cand = np.flatnonzero(ball)
            i = cand[np.argmin(fcost[cand])]
            opened[i] = True
            claimed |= ball
        y = (opened & ~free).astype(float)
        return Recourse(y, float(self.f2 @ y) + self._assign_cost(opened, cl))

    # --- first-stage rounding
    def local_round(self, x):
        """Demand-oblivious filtering of the stage-I vector.

        Every client gets the smallest radius whose ball holds stage-I mass
        1/4; clients are clustered by increasing radius and each cluster opens
        its cheapest facility. Opening cost is at most 4 c.x.
        """
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        nf = self.nf
        opened = np.zeros(nf)
        radii = []
        for j in range(self.n_ground):
            order = np.argsort(self.d[:, j], kind="stable")
            mass = np.cumsum(x[order])
            hit = np.flatnonzero(mass >= 0.25 - 1e-12)
            if hit.size:
                radii.append((self.d[order[hit[0]], j], j))
        claimed = np.zeros(nf, dtype=bool)
        for R, j in sorted(radii):
            ball = self.d[:, j] <= R + 1e-12
            if np.any(ball & claimed):
                continue
            cand = np.flatnonzero(ball)
            i = cand[np.argmin(self.c[cand])]
            opened[i] = 1.0
            claimed |= ball
        return Rounding(opened, self.rho)
