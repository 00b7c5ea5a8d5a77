"""Command-line entry point: ``philo <verb> ...``; every verb prints JSON."""
from __future__ import annotations

import argparse
import json
import sys
import warnings

from . import config_lp, decomposition, driver, halfdouble, instance
from .estimators import ALGORITHMS


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=1)
    sys.stdout.write("\n")


def _load_pair(args):
    inst = instance.load(args.inst)
    sol = None
    if getattr(args, "lp", None):
        sol, inst = config_lp.load_solution(args.lp, inst)
    return inst, sol


def cmd_gen_instance(args) -> int:
    if args.kind == "ud-hard":
        inst = instance.gen_unit_demand_hard(args.delta)
    elif args.kind == "xos-hard":
        inst = instance.gen_xos_hard(args.delta, mode=args.mode, n_types=args.n_types, seed=args.seed)
    else:
        inst = instance.gen_random_submodular(args.m, args.T, args.K, args.seed,
                                              all_subsets=args.all_subsets)
    instance.save(inst, args.out)
    _dump({"out": args.out, "m": inst.m, "T": inst.T, "columns": inst.n_columns()})
    return 0


def cmd_solve_lp(args) -> int:
    inst = instance.load(args.inst)
    sol = config_lp.build_and_solve(inst)
    if args.tighten:
        sol, inst = config_lp.tighten(sol, inst)
    config_lp.save_solution(sol, args.out)
    _dump({"out": args.out, "objective": sol.objective, "tight": sol.tight,
           "feasibility": config_lp.verify_feasibility(sol, inst).to_dict(), **sol.info})
    return 0


def cmd_decompose(args) -> int:
    from .baseline import build_bundle

    inst, sol = _load_pair(args)
    if sol is None:
        sol = config_lp.build_and_solve(inst)
    sol, inst = config_lp.tighten(sol, inst)
    bundle = build_bundle(inst, sol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dec = decomposition.compute(inst, sol, bundle, args.eps, args.eps_e)
    audit = decomposition.verify_decomposition_bounds(dec, sol, bundle)
    aft = halfdouble.audit_late_free_request_prob(inst, sol, dec)
    _dump({**dec.summary(), "audit": audit.to_dict(),
           "max_pr_in_AF": aft["max"], "aft_pass": aft["pass"]})
    return 0


def cmd_run(args) -> int:
    inst, sol = _load_pair(args)
    if args.alg == "optimal-dp":
        _dump({"alg": "optimal-dp", "opt_online": driver.opt_online_dp(inst)})
        return 0
    params = {}
    if args.alg in ("halfdouble", "combined"):
        params["max_triples"] = args.max_triples
    if args.alg == "combined":
        params["force"] = args.force
    model = ALGORITHMS[args.alg](eps=args.eps, eps_e=args.eps_e, **params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = driver.monte_carlo(model, inst, args.trials, args.seed, solution=sol)
    out = {"alg": args.alg, "lp_value": rep.lp_value, **rep.algorithms[type(model).__name__],
           "parameters": rep.parameters, "wall_time": rep.wall_time}
    if args.explain:
        out["explain"] = {
            "easy_check": bool(model.easy_),
            "opt_sum": model.bundle_.opt_sum,
            "thresholds": [list(p.tau) for p in model.bundle_.policies],
        }
        if hasattr(model, "t_indices_"):
            out["explain"]["t_i"] = [t + 1 for t in model.t_indices_]
    if args.dump_trace:
        trace = model.run(driver.trial_seed(args.seed, 0))
        with open(args.dump_trace, "w") as fh:
            json.dump(_trace_dict(trace), fh, indent=1)
            fh.write("\n")
    _dump(out)
    return 0


def _trace_dict(trace) -> dict:
    branch = getattr(trace, "branch", None)
    if branch is not None:
        return {"branch": branch, **_trace_dict(trace.trace)}
    if hasattr(trace, "to_dict"):
        return trace.to_dict()
    items = lambda s: sorted(i + 1 for i in s)  # noqa: E731
    return {
        "reward": trace.reward,
        "pi_value": trace.pi_value,
        "steps": [{"t": t + 1, "k": k + 1, "S_req": items(r), "S_alg": items(a)}
                  for t, (k, r, a) in enumerate(zip(trace.types, trace.requested, trace.allocated))],
    }


def cmd_gap_report(args) -> int:
    inv = [int(x) for x in args.deltas.split(",") if x.strip()]
    reports = driver.gap_report([1.0 / n for n in inv])
    if args.csv:
        sys.stdout.write(driver.gap_csv(reports))
    else:
        _dump([r.to_dict() for r in reports])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="philo", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen-instance", help="write a generated instance")
    g.add_argument("--kind", choices=["ud-hard", "xos-hard", "random"], required=True)
    g.add_argument("--delta", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--mode", choices=["enumerate", "sample"], default="enumerate")
    g.add_argument("--n-types", type=int, default=None)
    g.add_argument("--m", type=int, default=4)
    g.add_argument("--T", type=int, default=3)
    g.add_argument("--K", type=int, default=2)
    g.add_argument("--all-subsets", action="store_true")
    g.set_defaults(func=cmd_gen_instance)

    s = sub.add_parser("solve-lp", help="solve the configuration LP")
    s.add_argument("--in", dest="inst", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tighten", action="store_true")
    s.set_defaults(func=cmd_solve_lp)

    d = sub.add_parser("decompose", help="free/deterministic decomposition and its audits")
    d.add_argument("--in", dest="inst", required=True)
    d.add_argument("--lp", default=None)
    d.add_argument("--eps", type=float, default=decomposition.EPS_DEFAULT)
    d.add_argument("--eps-e", type=float, default=decomposition.EPS_E_DEFAULT)
    d.set_defaults(func=cmd_decompose)

    r = sub.add_parser("run", help="Monte Carlo of an allocation algorithm")
    r.add_argument("--alg", choices=list(ALGORITHMS) + ["optimal-dp"], required=True)
    r.add_argument("--in", dest="inst", required=True)
    r.add_argument("--lp", default=None)
    r.add_argument("--trials", type=int, default=1000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--eps", type=float, default=decomposition.EPS_DEFAULT)
    r.add_argument("--eps-e", type=float, default=decomposition.EPS_E_DEFAULT)
    r.add_argument("--force", choices=["baseline", "halfdouble"], default=None)
    r.add_argument("--max-triples", type=int, default=halfdouble.MAX_TRIPLES)
    r.add_argument("--explain", action="store_true", help="include thresholds and branch data")
    r.add_argument("--dump-trace", default=None, help="write the first trial's trace here")
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("gap-report", help="integrality gap on the XOS hard instances")
    q.add_argument("--deltas", default="2,3,4", help="comma-separated values of 1/delta")
    q.add_argument("--csv", action="store_true")
    q.set_defaults(func=cmd_gap_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
