"""Command-line surface.

Verbs: `osdc dp`, `osdc ratio`, `oscc run`, `oscc bound`, `simulate`.
Exit codes: 0 success, 1 usage error, 2 invariant violation (validation
failure, broken coverage, parameter out of admissible range).
"""

from __future__ import annotations

import argparse
import math
import sys

from . import bounds as bd
from . import distributions as dist_mod
from . import oscc as oscc_mod
from . import ratio as ratio_mod
from . import harness as sim_mod
from .osdc import build_dp, optimal_alg_cost
from .report import curve_to_csv, report_to_csv, to_json


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def parse_policy_params(spec: str, n: int) -> oscc_mod.OsccPolicyParams:
    if spec == "disser":
        return oscc_mod.disser_params(n)
    if spec.startswith("family:"):
        kv = {}
        for part in spec.split(":", 1)[1].split(","):
            key, val = part.split("=")
            kv[key.strip()] = float(val)
        return oscc_mod.family_params(kv["a"], kv["beta"], kv["q"], n)
    raise ValueError(f"unknown params spec {spec!r}; use 'disser' or 'family:a=..,beta=..,q=..'")


def _cmd_osdc_dp(args) -> int:
    dist = dist_mod.parse_dist_spec(args.dist)
    dp = build_dp(dist, args.n)
    alg = optimal_alg_cost(dp)
    opt = dist_mod.opt_expected(dist, args.n)
    if args.csv:
        rows = [(i + 1, dp.d[i], dp.q[i]) for i in range(dp.n)]
        _emit(curve_to_csv(rows, ("i", "d", "q")), args.out)
        return 0
    payload = {"d": list(dp.d), "q": list(dp.q), "alg_cost": alg,
               "opt_cost": opt, "ratio": alg / opt}
    _emit(to_json(payload), args.out)
    return 0


def _cmd_osdc_ratio(args) -> int:
    if args.asymptotic:
        sol = ratio_mod.solve_zeta_star(tol=args.tol)
        if args.csv:
            _emit(curve_to_csv(list(sol.grid), ("x", "y")), args.out)
        else:
            _emit(to_json({"zeta_star": sol.zeta_star,
                           "terminal_gap": sol.terminal_gap}), args.out)
        return 0
    cert = ratio_mod.solve_zeta(args.n)
    payload = {
        "n": cert.n, "zeta_n": cert.zeta_n, "eps": list(cert.eps),
        "d": list(cert.d), "delta2": cert.delta2,
        "residuals": dict(cert.residuals), "small_n": cert.small_n,
    }
    if args.certificate:
        _emit(to_json(payload), args.certificate)
    if args.csv:
        rows = [(i + 1, cert.eps[i], cert.d[i]) for i in range(cert.n)]
        _emit(curve_to_csv(rows, ("i", "eps", "d")), args.out)
    else:
        _emit(to_json({"n": cert.n, "zeta_n": cert.zeta_n,
                       "residuals": dict(cert.residuals)}), args.out)
    worst = max(cert.residuals.values())
    return 0 if worst < 1e-8 else 2


def _cmd_oscc_run(args) -> int:
    dist = dist_mod.parse_dist_spec(args.dist)
    params = parse_policy_params(args.params, args.n)
    report = sim_mod.simulate(("oscc-meta", params), ("iid", dist, args.n),
                              trials=args.trials, seed=args.seed)
    text = report_to_csv(report.to_dict()) if args.csv else to_json(report.to_dict())
    _emit(text, args.out)
    return 0 if report.violations == 0 else 2


def _cmd_oscc_bound(args) -> int:
    if args.general:
        if args.asymptotic or args.n is None:
            res = bd.general_dual_bound(args.a, args.beta, args.q, mode="asymptotic")
        else:
            res = bd.general_dual_bound(args.a, args.beta, args.q, mode="finite", n=args.n)
        pt = bd.p_tilde(args.a, args.beta, args.q)
        E = (2 * args.q - 1) * pt - (args.q - 1)
        payload = {
            "mode": res.mode, "prefactor": res.prefactor, "bound": res.bound,
            "eps_star": res.eps_star, "eps_star_level": res.eps_star_level,
            "phi0_star": res.phi0_star, "p_tilde": pt, "E": E,
        }
        _emit(to_json(payload), args.out)
        return 0

    j_end = args.j_end if args.j_end is not None else args.j
    rows = []
    for j in range(args.j, j_end + 1):
        if args.published:
            ratio = bd.published_table_objective(args.a, args.beta, args.q, j,
                                                 mode=args.mode)
        else:
            ratio = bd.ladder_ratio(args.a, args.beta, args.q, j, mode=args.mode)
        rows.append((j, ratio))
    if args.csv:
        _emit(curve_to_csv(rows, ("j", "objective")), args.out)
    else:
        dual = bd.uniform_dual(args.a, args.beta, args.q, j_end)
        payload = {
            "rows": [{"j": j, "objective": r} for j, r in rows],
            "mode": args.mode,
            "published": args.published,
            "E": dual.E, "theta": dual.theta, "lambda": dual.lam,
            "G1": dual.G1, "G2": dual.G2, "G3": dual.G3, "G4": dual.G4,
            "kappa": dual.kappa,
            "asymptotic_ratio": dual.G1 / math.log(args.q),
        }
        _emit(to_json(payload), args.out)
    return 0


def _cmd_simulate(args) -> int:
    if args.instance == "noniid-impossibility":
        inst = sim_mod.make_noniid_impossibility(args.n)
        report = sim_mod.simulate(("osdc-optimal",), ("noniid", inst),
                                  trials=args.trials, seed=args.seed, exact=True)
    else:
        dist = dist_mod.parse_dist_spec(args.dist)
        if args.policy == "osdc-optimal":
            policy = ("osdc-optimal",)
        else:
            policy = ("oscc-meta", parse_policy_params(args.params, args.n))
        report = sim_mod.simulate(policy, ("iid", dist, args.n),
                                  trials=args.trials, seed=args.seed, exact=args.exact)
    text = report_to_csv(report.to_dict()) if args.csv else to_json(report.to_dict())
    _emit(text, args.out)
    return 0 if report.violations == 0 else 2


def build_parser() -> _Parser:
    p = _Parser(prog="contractsel", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    osdc = sub.add_parser("osdc", parents=[], help="deferred-contract model")
    osdc_sub = osdc.add_subparsers(dest="action", required=True)

    dp = osdc_sub.add_parser("dp", help="state costs and benchmark quantiles")
    dp.add_argument("--dist", required=True)
    dp.add_argument("--n", type=int, required=True)
    dp.add_argument("--json", action="store_true", help="JSON output (default)")
    dp.add_argument("--csv", action="store_true", help="emit the (i, d, q) table")
    dp.add_argument("--out")
    dp.set_defaults(func=_cmd_osdc_dp)

    rt = osdc_sub.add_parser("ratio", help="exact ratio with certificate")
    rt.add_argument("--n", type=int)
    rt.add_argument("--certificate", help="write the full certificate JSON here")
    rt.add_argument("--asymptotic", action="store_true")
    rt.add_argument("--tol", type=float, default=1e-3)
    rt.add_argument("--json", action="store_true")
    rt.add_argument("--csv", action="store_true", help="emit the (i, eps, d) chain")
    rt.add_argument("--out")
    rt.set_defaults(func=_cmd_osdc_ratio)

    oscc = sub.add_parser("oscc", help="concurrent-contract model")
    oscc_sub = oscc.add_subparsers(dest="action", required=True)

    run = oscc_sub.add_parser("run", help="Monte Carlo of the meta-policy")
    run.add_argument("--params", required=True)
    run.add_argument("--dist", required=True)
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--trials", type=int, default=100_000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--json", action="store_true")
    run.add_argument("--csv", action="store_true")
    run.add_argument("--out")
    run.set_defaults(func=_cmd_oscc_run)

    bound = oscc_sub.add_parser("bound", help="analytic cost bounds")
    bound.add_argument("--family", choices=["uniform"])
    bound.add_argument("--general", action="store_true")
    bound.add_argument("--j", type=int, default=10)
    bound.add_argument("--j-end", type=int, dest="j_end")
    bound.add_argument("--mode", choices=list(bd.LADDER_MODES), default="ptilde_c")
    bound.add_argument("--published", action="store_true",
                       help="reproduce the reference table (drops the state-0 miss cost)")
    bound.add_argument("--a", type=float, default=4.0)
    bound.add_argument("--beta", type=float, default=0.89)
    bound.add_argument("--q", type=float, default=2.27)
    bound.add_argument("--n", type=int)
    bound.add_argument("--asymptotic", action="store_true")
    bound.add_argument("--json", action="store_true")
    bound.add_argument("--csv", action="store_true")
    bound.add_argument("--out")
    bound.set_defaults(func=_cmd_oscc_bound)

    sim = sub.add_parser("simulate", help="Monte Carlo / exact policy evaluation")
    sim.add_argument("--policy", default="osdc-optimal",
                     choices=["osdc-optimal", "oscc-meta"])
    sim.add_argument("--params", default="disser")
    sim.add_argument("--instance", default="iid", choices=["iid", "noniid-impossibility"])
    sim.add_argument("--dist", default="uniform")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--trials", type=int, default=100_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--exact", action="store_true")
    sim.add_argument("--json", action="store_true")
    sim.add_argument("--csv", action="store_true")
    sim.add_argument("--out")
    sim.set_defaults(func=_cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "verb", None) == "osdc" and args.action == "ratio":
        if not args.asymptotic and args.n is None:
            parser.error("osdc ratio needs --n or --asymptotic")
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as exc:
        print(f"contractsel: invariant violation: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"contractsel: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
