"""Command-line front end: ``drso solve | gen | experiment``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import ellipsoid, exactref, linfty, saa
from .core import AmbiguityBall, CentralDistribution, IndependentSampler, ScenarioMetric, empirical_estimate, split_seed
from .errors import DrsoError, ParseError, TooLarge
from .gxy import default_oracle, kmaxmin_bruteforce, kmaxmin_fl_greedy
from .instance_io import dump_instance, load_instance
from .problems import FAMILIES, generate, random_center, vc3

METHODS = ("saa-ellipsoid", "collapsible-lp", "linfty", "setcover-special")
SUITES = ("acceptance", "saa-sweep", "kmaxmin-bench")
COLUMNS = ["suite", "instance", "method", "samples", "seed", "value", "exact_opt", "ratio", "bound", "ok"]


def _num(v):
    """Floats rounded to 12 significant digits so reports are stable across platforms."""
    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        return str(v)
    return float(f"{v:.12g}")


def _vec(x):
    return [_num(t) for t in np.asarray(x, dtype=float)]


def _dumps(rec):
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(rows, timing=False):
    cols = COLUMNS + (["runtime"] if timing else [])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in cols})
    return buf.getvalue()


# ---------------------------------------------------------------- solve


def _center_distribution(inst, args):
    """Distribution the solvers work with: the explicit center, or an empirical estimate."""
    p = inst.ball.center.explicit
    if p is not None and args.samples is None:
        return p, "explicit"
    N = args.samples or 1000
    return empirical_estimate(inst.ball.center, N, split_seed(args.seed, 0)), f"empirical:{N}"


def solve_instance(inst, args):
    """Run the chosen method and return (records, summary row)."""
    problem, ball, metric = inst.problem, inst.ball, inst.metric
    seed = args.seed
    recs = []
    manifest = {
        "record": "manifest",
        "command": "solve",
        "instance": inst.path,
        "instance_hash": inst.content_hash(),
        "config": {
            "method": args.method,
            "epsilon": args.epsilon,
            "delta": args.delta,
            "kappa": args.kappa,
            "replicates": args.replicates,
            "samples": args.samples,
            "C": args.sample_constant,
            "seed": seed,
            "exact": args.exact,
        },
        "out": args.out,
    }
    recs.append(manifest)
    method = args.method
    if method == "linfty" and ball.kind != "linf":
        raise DrsoError("method linfty needs an L-infinity ball")
    if method != "linfty" and ball.kind == "linf":
        raise DrsoError(f"method {method} needs a Wasserstein ball")
    sol = {"record": "solution", "method": method, "seed": seed}
    fractional_value = None
    if method == "saa-ellipsoid":
        if args.replicates is not None or ball.center.explicit is None:
            cfg = saa.SaaConfig(
                eps=min(args.epsilon, 1 / 3),
                delta=args.delta,
                kappa=args.kappa,
                replicates=args.replicates,
                samples=args.samples,
                C=args.sample_constant,
                seed=seed,
            )
            rep = saa.run_saa(problem, ball, cfg, lambda pr, p, r, m: saa.poly_solver(pr, p, r, m, args.epsilon))
            for row in rep.rows:
                recs.append(
                    {
                        "record": "replicate",
                        "index": row.index,
                        "seed": row.seed,
                        "x": _vec(row.x),
                        "estimate": _num(row.estimate),
                        "support": row.support,
                    }
                )
            x, est = rep.x, rep.estimate
            sol.update(selected=rep.selected, samples=rep.samples)
        else:
            p, mode = _center_distribution(inst, args)
            res = ellipsoid.solve_saa_poly(problem, p, ball.r, metric, default_oracle(problem, metric), eps=args.epsilon)
            for i, cut in enumerate(res.cuts):
                recs.append({"record": "cut", "iteration": i, "kind": cut.kind, "estimate": _num(cut.estimate), "seed": seed})
            x, est = res.x, res.estimate
            sol.update(distribution=mode, iterations=res.iterations, oracle_calls=res.oracle_calls, zero_optimal=res.zero_optimal)
        sol.update(x=_vec(x), estimate=_num(est), rho=_num(problem.rho))
        value = est
    elif method == "collapsible-lp":
        p, mode = _center_distribution(inst, args)
        res = ellipsoid.solve_saa_collapsible(problem, p, ball.r, metric)
        sol.update(
            distribution=mode,
            x_fractional=_vec(res.x_frac),
            value=_num(res.value),
            x=_vec(res.x),
            value_rounded=_num(res.value_rounded),
            y=_num(res.y),
            rho_emp=_num(res.rounding.rho_emp if res.rounding is not None else None),
        )
        value = fractional_value = res.value
    elif method == "setcover-special":
        if problem.family not in ("set_cover", "vertex_cover", "edge_cover"):
            raise DrsoError("setcover-special needs a covering problem")
        p, mode = _center_distribution(inst, args)
        res = ellipsoid.solve_setcover_specialized(problem, p, ball.r, metric, default_oracle(problem, metric), eps=args.epsilon)
        sol.update(distribution=mode, x_fractional=_vec(res.x_frac), estimate=_num(res.estimate), x=_vec(res.x))
        value = fractional_value = res.estimate
    else:
        res = linfty.solve_linfty(problem, ball.center, ball.r, eps=min(args.epsilon, 1 / 3), delta=args.delta, seed=seed)
        xr = problem.local_round(res.x).x
        est = res.estimate
        sol.update(
            x_fractional=_vec(res.x),
            proxy=_num(res.value),
            x=_vec(xr),
            iterations=res.iterations,
            free_mass=_num(est.value if est else None),
        )
        value = fractional_value = res.value
    recs.append(sol)
    row = {"suite": "solve", "instance": inst.path, "method": method, "seed": seed, "value": _num(value)}
    if args.exact:
        if ball.center.explicit is None:
            raise TooLarge("exact reference needs an enumerable center")
        if fractional_value is not None and method in ("collapsible-lp", "setcover-special", "linfty"):
            xo, opt = exactref.exact_fractional_optimum(problem, ball)
            kind = "fractional"
            if method == "linfty":
                value = exactref.exact_objective(problem, np.array(sol["x_fractional"]), ball)
        else:
            xo, opt = exactref.exact_discrete_optimum(problem, ball)
            kind = "integral"
            value = exactref.exact_objective(problem, np.array(sol["x"]), ball)
        ratio = value / opt if opt > 0 else (1.0 if value <= 1e-12 else math.inf)
        recs.append(
            {
                "record": "exact",
                "kind": kind,
                "x_opt": _vec(xo),
                "opt": _num(opt),
                "value": _num(value),
                "ratio": _num(ratio),
                "seed": seed,
            }
        )
        row.update(value=_num(value), exact_opt=_num(opt), ratio=f"{ratio:.2f}")
    return recs, row


def cmd_solve(args):
    inst = load_instance(args.instance)
    t0 = time.perf_counter()
    recs, row = solve_instance(inst, args)
    if args.timing:
        row["runtime"] = f"{time.perf_counter() - t0:.3f}"
        recs[-1 if recs[-1]["record"] != "exact" else -2]["runtime"] = row["runtime"]
    if args.format == "csv":
        _emit(_csv([row], args.timing), args.out)
    else:
        _emit("".join(_dumps(r) + "\n" for r in recs), args.out)
    return 0


# ---------------------------------------------------------------- gen


def _parse_size(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ParseError(f"size parameter {item!r} must look like key=value", None, "size")
        k, v = item.split("=", 1)
        try:
            out[k] = int(v)
        except ValueError:
            raise ParseError(f"size parameter {item!r} needs an integer", None, k) from None
    return out


def build_generated(family, seed, size=None, r=0.25, ball_kind="wasserstein", metric_kind="discrete", support=None, large=False, k=None):
    problem = generate(family, seed, size, k)
    if not large and problem.space.count() > 256:
        raise TooLarge("instance exceeds the exact-reference guard; pass --large to allow it")
    if metric_kind == "asym_inf":
        if family == "facility_location":
            metric = problem.client_metric()
        elif family == "steiner":
            metric = problem.terminal_metric()
        else:
            raise DrsoError("asym_inf needs a facility_location or steiner family")
    else:
        metric = ScenarioMetric.discrete()
    center = CentralDistribution.from_explicit(random_center(problem, split_seed(seed, 7), support))
    ball = AmbiguityBall(center, r, ball_kind, metric if ball_kind == "wasserstein" else None)
    ball.metric = metric
    return problem, ball


def cmd_gen(args):
    problem, ball = build_generated(
        args.family, args.seed, _parse_size(args.size), args.r, args.ball, args.metric, args.support, args.large, args.k
    )
    _emit(dump_instance(problem, ball), args.out)
    return 0


# ---------------------------------------------------------------- experiments


def _acceptance_task(task):
    fam, seed, eps = task
    problem = generate(fam, seed)
    metric = ScenarioMetric.discrete()
    p = random_center(problem, split_seed(seed, 7))
    r = 0.05 + 0.05 * (seed % 8)
    ball = AmbiguityBall(CentralDistribution.from_explicit(p), r, "wasserstein", metric)
    rows = []
    t0 = time.perf_counter()
    col = ellipsoid.solve_saa_collapsible(problem, p, r, metric)
    _, fopt = exactref.exact_fractional_optimum(problem, ball)
    rows.append(
        {
            "instance": f"{fam}-{seed}",
            "method": "collapsible-lp",
            "value": _num(col.value),
            "exact_opt": _num(fopt),
            "ratio": _num(col.value / fopt if fopt > 0 else 1.0),
            "bound": 1.0,
            "ok": abs(col.value - fopt) <= 1e-6 * (1 + abs(fopt)),
            "runtime": time.perf_counter() - t0,
        }
    )
    t0 = time.perf_counter()
    sol = ellipsoid.solve_saa_poly(problem, p, r, metric, default_oracle(problem, metric), eps=eps)
    _, opt = exactref.exact_discrete_optimum(problem, ball)
    bound = problem.rho * (1 + eps)
    ratio = sol.estimate / opt if opt > 0 else 1.0
    rows.append(
        {
            "instance": f"{fam}-{seed}",
            "method": "saa-ellipsoid",
            "value": _num(sol.estimate),
            "exact_opt": _num(opt),
            "ratio": _num(ratio),
            "bound": _num(bound),
            "ok": ratio <= bound + 1e-6,
            "runtime": time.perf_counter() - t0,
        }
    )
    for row in rows:
        row.update(suite="acceptance", seed=seed)
    return rows


def sweep_problem():
    """Fixed sampler-only instance for the sample-size sweep."""
    problem = vc3()
    sampler = IndependentSampler([0.6, 0.3, 0.2])
    center = CentralDistribution(sampler, sampler.explicit())
    return problem, AmbiguityBall(center, 0.25, "wasserstein", ScenarioMetric.discrete())


def _sweep_task(task):
    N, trial, seed, eps = task
    problem, ball = sweep_problem()
    t0 = time.perf_counter()
    black_box = AmbiguityBall(CentralDistribution(ball.center.sampler), ball.r, ball.kind, ball.metric)
    cfg = saa.SaaConfig(eps=eps, delta=0.1, replicates=8, samples=N, seed=split_seed(seed, N, trial))
    rep = saa.run_saa(problem, black_box, cfg)
    val = exactref.exact_objective(problem, rep.x, ball)
    _, opt = exactref.exact_discrete_optimum(problem, ball)
    bound = 4 * problem.rho * (1 + 1)
    return [
        {
            "suite": "saa-sweep",
            "instance": "vc3-independent",
            "method": "saa-ellipsoid",
            "samples": N,
            "seed": cfg.seed,
            "value": _num(val),
            "exact_opt": _num(opt),
            "ratio": _num(val / opt),
            "bound": _num(bound),
            "ok": val <= bound * opt + 1e-9,
            "runtime": time.perf_counter() - t0,
        }
    ]


def _kmaxmin_task(task):
    idx, seed = task
    rng = np.random.default_rng(seed)
    problem = generate("facility_location", seed, {"clients": int(rng.integers(3, 8)), "facilities": int(rng.integers(2, 4))})
    k = int(rng.integers(1, min(4, problem.n_ground) + 1))
    x = (rng.random(problem.m) < 0.3).astype(float)
    t0 = time.perf_counter()
    J = kmaxmin_fl_greedy(problem, x, k)
    B = kmaxmin_bruteforce(problem, x, k)
    gg, gb = problem.g(x, J), problem.g(x, B)
    ratio = gb / gg if gg > 0 else (1.0 if gb <= 1e-12 else math.inf)
    return [
        {
            "suite": "kmaxmin-bench",
            "instance": f"fl-{idx}-k{k}",
            "method": "fl-greedy",
            "seed": seed,
            "value": _num(gg),
            "exact_opt": _num(gb),
            "ratio": _num(ratio),
            "bound": 6.0,
            "ok": ratio <= 6 + 1e-9,
            "runtime": time.perf_counter() - t0,
        }
    ]


def suite_tasks(suite, trials, seed, eps):
    if suite == "acceptance":
        return _acceptance_task, [(fam, split_seed(seed, i, j) % 100000, eps) for i, fam in enumerate(FAMILIES) for j in range(trials)]
    if suite == "saa-sweep":
        return _sweep_task, [(N, t, seed, 0.2) for N in (50, 200, 800) for t in range(trials)]
    if suite == "kmaxmin-bench":
        return _kmaxmin_task, [(i, split_seed(seed, i) % 100000) for i in range(trials)]
    raise ValueError(f"unknown suite {suite!r}")


def run_suite(suite, trials, seed=0, eps=0.1, workers=1):
    fn, tasks = suite_tasks(suite, trials, seed, eps)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(fn, tasks))
    else:
        parts = [fn(t) for t in tasks]
    rows = [row for part in parts for row in part]
    if suite == "saa-sweep":
        for N in (50, 200, 800):
            sel = [r for r in rows if r["samples"] == N and r["method"] == "saa-ellipsoid"]
            rate = sum(r["ok"] for r in sel) / len(sel)
            rows.append({"suite": suite, "instance": "vc3-independent", "method": "success-rate", "samples": N, "seed": seed, "value": _num(rate), "ok": True})
    return rows


DEFAULT_TRIALS = {"acceptance": 4, "saa-sweep": 20, "kmaxmin-bench": 50}


def cmd_experiment(args):
    trials = args.trials or DEFAULT_TRIALS[args.suite]
    rows = run_suite(args.suite, trials, args.seed, args.epsilon, args.workers)
    for row in rows:
        if "runtime" in row:
            row["runtime"] = f"{row['runtime']:.3f}" if args.timing else None
    if args.format == "records":
        out = "".join(_dumps({k: v for k, v in r.items() if v is not None}) + "\n" for r in rows)
    else:
        out = _csv(rows, args.timing)
    _emit(out, args.out)
    bad = [r for r in rows if not r.get("ok", True)]
    for r in bad:
        sys.stderr.write(f"violation: {r['instance']} {r['method']} ratio {r.get('ratio')} > bound {r.get('bound')}\n")
    return 1 if bad else 0


# ---------------------------------------------------------------- entry point


def _common(p, fmt_default):
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "records"), default=fmt_default)
    p.add_argument("--timing", action="store_true", help="add wall-clock columns (breaks byte-identical reruns)")


def build_parser():
    ap = argparse.ArgumentParser(prog="drso", description="Distributionally robust two-stage solver")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--method", choices=METHODS, default="saa-ellipsoid")
    s.add_argument("--exact", action="store_true", help="also compute the brute-force reference")
    s.add_argument("--kappa", type=float, default=0.0)
    s.add_argument("--replicates", type=int, default=None)
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--sample-constant", type=float, default=4.0)
    _common(s, "records")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gen", help="write a random instance file")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("--size", nargs="*", metavar="KEY=VALUE")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--r", type=float, default=0.25)
    g.add_argument("--ball", choices=("wasserstein", "linf"), default="wasserstein")
    g.add_argument("--metric", choices=("discrete", "asym_inf"), default="discrete")
    g.add_argument("--support", type=int, default=None)
    g.add_argument("--k", type=int, default=None)
    g.add_argument("--large", action="store_true")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("experiment", help="run a named suite and write CSV")
    e.add_argument("suite", choices=SUITES)
    e.add_argument("--trials", type=int, default=None)
    e.add_argument("--workers", type=int, default=1)
    _common(e, "csv")
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        sys.stderr.write(f"parse error: {e}\n")
        return 2
    except (DrsoError, OSError, ValueError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
