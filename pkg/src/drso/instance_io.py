"""JSON instance files.

An instance file is one JSON object with five blocks::

    {
      "ground": {"elements": 3}
              | {"graph": {"vertices": 3, "edges": [[0, 1], [0, 2]]}}
              | {"distances": [[...]], "facilities": 2}     # facility location
              | {"distances": [[...]]},                     # steiner
      "problem": {"family": "vertex_cover", "first_cost": [...], "second_cost": [...],
                  "sets": [[0, 1], [2]],          # set_cover only
                  "anchor": 0,                    # facility_location, optional
                  "lambda": 2.0, "root": 0,       # steiner
                  "k": null},
      "metric": {"kind": "discrete"} | {"kind": "asym_inf"},
      "ball": {"kind": "wasserstein" | "linf", "r": 0.25},
      "distribution": {"explicit": [[[0], "1/2"], [[0, 1, 2], "1/2"]]}
                    | {"sampler": {"independent": [0.5, 0.2, 0.7]}}
    }

Scenarios are lists of ground-element ids; probabilities are numbers or
fraction strings. For ``asym_inf`` the base distances come from the
problem (clients for facility location, non-root nodes for steiner).
"""

from __future__ import annotations

import hashlib
import json
import re
from fractions import Fraction

import numpy as np

from .core import (
    AmbiguityBall,
    CentralDistribution,
    ExplicitDistribution,
    IndependentSampler,
    ScenarioMetric,
    mask_of,
    members,
)
from .errors import ParseError
from .problems import (
    EdgeCoverInstance,
    FacilityLocationInstance,
    SetCoverInstance,
    SteinerInstance,
    VertexCoverInstance,
)


class Instance:
    def __init__(self, problem, ball, text=None, path=None):
        self.problem = problem
        self.ball = ball
        self.text = text
        self.path = path

    @property
    def metric(self):
        return self.ball.metric

    def content_hash(self):
        data = (self.text if self.text is not None else dump_instance(self.problem, self.ball)).encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _line_of(text, key):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Reader:
    def __init__(self, text):
        self.text = text

    def fail(self, field, message):
        raise ParseError(message, _line_of(self.text, field.split(".")[-1]), field)

    def get(self, block, key, path, kind=None, default=...):
        if not isinstance(block, dict):
            self.fail(path, f"{path} must be an object")
        if key not in block:
            if default is ...:
                self.fail(f"{path}.{key}", f"missing field {path}.{key}")
            return default
        v = block[key]
        if kind is not None and not isinstance(v, kind):
            self.fail(f"{path}.{key}", f"field {path}.{key} has the wrong type")
        return v

    def vector(self, block, key, path, n=None):
        v = self.get(block, key, path, list)
        try:
            arr = np.array([float(t) for t in v])
        except (TypeError, ValueError):
            self.fail(f"{path}.{key}", f"field {path}.{key} must be a list of numbers")
        if n is not None and arr.size != n:
            self.fail(f"{path}.{key}", f"field {path}.{key} needs {n} entries, got {arr.size}")
        return arr


def _prob(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError("probability must be a number or fraction string")
    return Fraction(v).limit_denominator(10**12) if isinstance(v, float) else Fraction(v)


def parse_instance(text, path=None) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", e.lineno, None) from None
    rd = _Reader(text)
    if not isinstance(doc, dict):
        raise ParseError("instance must be a JSON object", 1, None)
    for block in ("ground", "problem", "metric", "ball", "distribution"):
        rd.get(doc, block, "instance", dict)
    ground, prob = doc["ground"], doc["problem"]
    family = rd.get(prob, "family", "problem", str)
    k = rd.get(prob, "k", "problem", default=None)
    if k is not None and (not isinstance(k, int) or k < 0):
        rd.fail("problem.k", "problem.k must be a nonnegative integer or null")
    try:
        problem = _build_problem(rd, family, ground, prob, k)
    except ParseError:
        raise
    except (ValueError, TypeError, IndexError) as e:
        rd.fail("problem", f"invalid problem: {e}")
    mblock = doc["metric"]
    kind = rd.get(mblock, "kind", "metric", str)
    if kind == "discrete":
        metric = ScenarioMetric.discrete()
    elif kind == "asym_inf":
        if family == "facility_location":
            metric = problem.client_metric()
        elif family == "steiner":
            metric = problem.terminal_metric()
        else:
            rd.fail("metric.kind", "asym_inf needs a facility_location or steiner problem")
    else:
        rd.fail("metric.kind", f"unknown metric kind {kind!r}")
    bblock = doc["ball"]
    bkind = rd.get(bblock, "kind", "ball", str)
    if bkind not in ("wasserstein", "linf"):
        rd.fail("ball.kind", f"unknown ball kind {bkind!r}")
    r = rd.get(bblock, "r", "ball", (int, float))
    if r < 0:
        rd.fail("ball.r", "ball.r must be nonnegative")
    center = _build_center(rd, doc["distribution"], problem)
    ball = AmbiguityBall(center, float(r), bkind, metric if bkind == "wasserstein" else None)
    if bkind == "linf":
        ball.metric = metric
    return Instance(problem, ball, text, path)


def _build_problem(rd, family, ground, prob, k):
    if family == "set_cover":
        n = rd.get(ground, "elements", "ground", int)
        sets = rd.get(prob, "sets", "problem", list)
        masks = []
        for s in sets:
            if not isinstance(s, list) or any(not isinstance(e, int) or not 0 <= e < n for e in s):
                rd.fail("problem.sets", "each set must list element ids inside the ground set")
            masks.append(mask_of(s))
        c = rd.vector(prob, "first_cost", "problem", len(masks))
        c2 = rd.vector(prob, "second_cost", "problem", len(masks))
        return SetCoverInstance(n, masks, c, c2, k)
    if family in ("vertex_cover", "edge_cover"):
        g = rd.get(ground, "graph", "ground", dict)
        nv = rd.get(g, "vertices", "ground.graph", int)
        edges = rd.get(g, "edges", "ground.graph", list)
        for e in edges:
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and 0 <= v < nv for v in e)):
                rd.fail("ground.graph.edges", "edges must be vertex pairs")
        n = nv if family == "vertex_cover" else len(edges)
        c = rd.vector(prob, "first_cost", "problem", n)
        c2 = rd.vector(prob, "second_cost", "problem", n)
        cls = VertexCoverInstance if family == "vertex_cover" else EdgeCoverInstance
        return cls(nv, edges, c, c2, k)
    if family == "facility_location":
        D = np.array(rd.get(ground, "distances", "ground", list), dtype=float)
        nf = rd.get(ground, "facilities", "ground", int)
        c = rd.vector(prob, "first_cost", "problem", nf)
        c2 = rd.vector(prob, "second_cost", "problem", nf)
        anchor = rd.get(prob, "anchor", "problem", default=None)
        return FacilityLocationInstance(D, nf, c, c2, anchor=anchor, k=k)
    if family == "steiner":
        if k is not None:
            rd.fail("problem.k", "steiner instances use the all-subsets scenario collection")
        D = np.array(rd.get(ground, "distances", "ground", list), dtype=float)
        lam = rd.get(prob, "lambda", "problem", (int, float))
        root = rd.get(prob, "root", "problem", int, default=0)
        return SteinerInstance(D, float(lam), root)
    rd.fail("problem.family", f"unknown family {family!r}")


def _build_center(rd, block, problem):
    n = problem.n_ground
    if "explicit" in block:
        rows = rd.get(block, "explicit", "distribution", list)
        mapping = {}
        for row in rows:
            if not (isinstance(row, list) and len(row) == 2 and isinstance(row[0], list)):
                rd.fail("distribution.explicit", "entries must be [scenario, probability]")
            if any(not isinstance(e, int) or not 0 <= e < n for e in row[0]):
                rd.fail("distribution.explicit", "scenario lists element ids outside the ground set")
            A = mask_of(row[0])
            if problem.k is not None and len(set(row[0])) > problem.k:
                rd.fail("distribution.explicit", "scenario exceeds the size bound k")
            try:
                mapping[A] = mapping.get(A, 0) + _prob(row[1])
            except (ValueError, ZeroDivisionError):
                rd.fail("distribution.explicit", f"bad probability {row[1]!r}")
        try:
            return CentralDistribution.from_explicit(ExplicitDistribution.from_mapping(mapping))
        except Exception as e:  # InfeasibleMarginals
            rd.fail("distribution.explicit", str(e))
    if "sampler" in block:
        s = rd.get(block, "sampler", "distribution", dict)
        probs = rd.vector(s, "independent", "distribution.sampler", n)
        if np.any(probs < 0) or np.any(probs > 1):
            rd.fail("distribution.sampler.independent", "probabilities must lie in [0, 1]")
        sampler = IndependentSampler(probs)
        explicit = sampler.explicit() if problem.k is None and 2**n <= 4096 else None
        return CentralDistribution(sampler, explicit)
    rd.fail("distribution", "distribution needs an explicit or sampler block")


def load_instance(path) -> Instance:
    with open(path) as fh:
        text = fh.read()
    return parse_instance(text, str(path))


# ---------------------------------------------------------------- writing


def _scen(A):
    return list(members(A))


def _problem_blocks(problem):
    fam = problem.family
    k = getattr(problem, "k", None)
    if fam == "set_cover":
        ground = {"elements": problem.n_ground}
        prob = {"sets": [_scen(s) for s in problem.sets]}
    elif fam in ("vertex_cover", "edge_cover"):
        nv = problem.n_vertices if fam == "vertex_cover" else problem.n_ground
        ground = {"graph": {"vertices": nv, "edges": [list(e) for e in problem.edges]}}
        prob = {}
    elif fam == "facility_location":
        ground = {"distances": problem.D.tolist(), "facilities": problem.nf}
        prob = {"anchor": problem.anchor}
    else:
        ground = {"distances": problem.cost.tolist()}
        prob = {"lambda": problem.lam, "root": problem.root}
        return ground, {"family": fam, **prob}
    prob = {"family": fam, "first_cost": problem.c.tolist(), "second_cost": (
        problem.f2 if fam == "facility_location" else problem.c2).tolist(), **prob, "k": k}
    return ground, prob


def dump_instance(problem, ball) -> str:
    ground, prob = _problem_blocks(problem)
    p = ball.center.explicit
    if p is not None:
        dist = {"explicit": [[_scen(A), str(w)] for A, w in zip(p.support, p.probs)]}
    else:
        dist = {"sampler": {"independent": ball.center.sampler.probs.tolist()}}
    metric = ball.metric.kind if ball.metric is not None else "discrete"
    doc = {
        "ground": ground,
        "problem": prob,
        "metric": {"kind": metric},
        "ball": {"kind": ball.kind, "r": ball.r},
        "distribution": dist,
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
