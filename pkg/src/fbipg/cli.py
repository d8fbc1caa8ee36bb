"""Command-line interface: ``fbipg {gen,oracle,solve,validate,compare}``.

Exit codes: 0 success, 1 audit failure (or a numeric breakdown), 2 usage error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import functions as fn
from . import rates
from .exceptions import ConfigurationError, NumericError, SpecError, UnsupportedError
from .harness import (OracleReport, audit_trace, compute_oracle, gen_least_squares,
                      gen_logistic, regime_for, run_experiment)
from .problem import load_problem
from .solver import FBiPGConfig, run_fbipg, run_fista_fixed
from .validation import SUITES, run_suite

EXIT_OK, EXIT_AUDIT, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


def _positive_float(flag):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects a number, got {text!r}") from None
        if not (v > 0 and math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"{flag} must be > 0, got {text}")
        return v
    return parse


def _int_at_least(flag, lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer, got {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"{flag} must be >= {lo}, got {v}")
        return v
    return parse


def build_parser():
    p = argparse.ArgumentParser(prog="fbipg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic data set and problem file")
    g.add_argument("--kind", choices=("least-squares", "logistic"), required=True)
    g.add_argument("--rows", type=_int_at_least("--rows", 1), required=True)
    g.add_argument("--cols", type=_int_at_least("--cols", 1), required=True)
    g.add_argument("--sparsity", type=_int_at_least("--sparsity", 0), default=None)
    g.add_argument("--consistent", action="store_true")
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--weight", type=float, default=1.0, help="weight of the l1 outer term")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    o = sub.add_parser("oracle", help="compute ground-truth quantities for a problem")
    o.add_argument("--problem", required=True)
    o.add_argument("--candidate", default=None,
                   help="CSV point to certify as the outer solution (default: x_planted.csv "
                        "next to the problem file, if present)")
    o.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="run a solver and write its trace")
    s.add_argument("--problem", required=True)
    s.add_argument("--algo", choices=("fbipg", "fista-fixed"), default="fbipg")
    s.add_argument("--gamma", type=float, default=1.5)
    s.add_argument("--a", type=int, default=2)
    s.add_argument("--alpha", default=None, help="fixed alpha for fista-fixed (number or 1/K)")
    s.add_argument("--iters", type=_int_at_least("--iters", 0), default=1000)
    s.add_argument("--t-mode", choices=("explicit", "fista"), default="explicit")
    s.add_argument("--lift", choices=("off", "auto", "force"), default="auto")
    s.add_argument("--audit", action="store_true")
    s.add_argument("--trace-every", type=_int_at_least("--trace-every", 1), default=1)
    s.add_argument("--x0", default="zeros", help="CSV path or 'zeros'")
    s.add_argument("--oracle", default=None, help="oracle.json written by 'fbipg oracle'")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    v = sub.add_parser("validate", help="run a property suite and print PASS/FAIL lines")
    v.add_argument("--suite", choices=sorted(SUITES), required=True)
    v.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("compare", help="run an experiment configuration")
    c.add_argument("--config", required=True)
    return p


# ---------------------------------------------------------------------------


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def cmd_gen(args):
    os.makedirs(args.out, exist_ok=True)
    meta = {"kind": args.kind, "rows": args.rows, "cols": args.cols, "seed": args.seed,
            "generator": "PCG64"}
    if args.kind == "least-squares":
        if args.sparsity is not None and args.sparsity > args.cols:
            raise _UsageError("--sparsity must not exceed --cols")
        A, b, x = gen_least_squares(args.rows, args.cols, args.seed, args.consistent,
                                    args.sparsity, args.noise)
        meta.update(consistent=args.consistent, sparsity=int(np.count_nonzero(x)),
                    noise=0.0 if args.consistent else args.noise)
        fn.save_vector(os.path.join(args.out, "b.csv"), b)
        inner = {"kind": "least_squares", "A": "A.csv", "b": "b.csv"}
    else:
        A, z, x = gen_logistic(args.rows, args.cols, args.seed)
        fn.save_vector(os.path.join(args.out, "z.csv"), z)
        inner = {"kind": "logistic", "A": "A.csv", "z": "z.csv"}
    fn.save_matrix(os.path.join(args.out, "A.csv"), A)
    fn.save_vector(os.path.join(args.out, "x_planted.csv"), x)
    _write_json(os.path.join(args.out, "meta.json"), meta)
    _write_json(os.path.join(args.out, "problem.json"), {
        "dim": args.cols, "inner_smooth": inner, "inner_prox": {"kind": "zero"},
        "outer_smooth": {"kind": "zero"}, "outer_prox": {"kind": "l1", "weight": args.weight}})
    print(f"wrote {args.kind} data set to {args.out}")
    return EXIT_OK


def _default_candidate(problem_path, given):
    if given is not None:
        return fn.load_vector(given)
    sibling = os.path.join(os.path.dirname(os.path.abspath(problem_path)), "x_planted.csv")
    return fn.load_vector(sibling) if os.path.exists(sibling) else None


def cmd_oracle(args):
    problem = load_problem(args.problem)
    candidate = _default_candidate(args.problem, args.candidate)
    try:
        rep = compute_oracle(problem, candidate=candidate)
    except UnsupportedError as exc:
        raise _UsageError(f"--problem: {exc}") from None
    os.makedirs(args.out, exist_ok=True)
    out = rep.as_dict()
    out["method"] = rep.method
    out["warnings"] = rep.warnings
    _write_json(os.path.join(args.out, "oracle.json"), out)
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"phi_star={rep.phi_star!r} omega_xprime={rep.omega_xprime!r}")
    return EXIT_OK


def _load_oracle(path):
    with open(path) as fh:
        raw = json.load(fh)
    xp = raw.get("x_prime")
    return OracleReport(phi_star=raw.get("phi_star"),
                        x_prime=None if xp is None else np.array(xp, dtype=float),
                        omega_xprime=raw.get("omega_xprime"),
                        omega_star_inf=raw.get("omega_star_inf"), tau=raw.get("tau"),
                        rho=raw.get("rho"), R2=raw.get("R2"))


def cmd_solve(args):
    if args.algo == "fbipg":
        if not (args.gamma > 0 and math.isfinite(args.gamma)):
            raise _UsageError(f"--gamma must be > 0, got {args.gamma}")
        if args.a < 2:
            raise _UsageError(f"--a must be an integer >= 2, got {args.a}")
    problem = load_problem(args.problem)
    x0 = None
    if args.x0 != "zeros":
        if not os.path.exists(args.x0):
            raise _UsageError(f"--x0: file not found: {args.x0}")
        x0 = fn.load_vector(args.x0)

    oracle = None
    if args.oracle:
        oracle = _load_oracle(args.oracle)
    elif args.audit:
        try:
            oracle = compute_oracle(problem, x0=x0,
                                    candidate=_default_candidate(args.problem, None))
        except UnsupportedError as exc:
            print(f"warning: oracle unavailable ({exc}); auditing without it", file=sys.stderr)

    if args.algo == "fbipg":
        cfg = FBiPGConfig(gamma=args.gamma, a=args.a, t_mode=args.t_mode, iters=args.iters,
                          trace_stride=args.trace_every, lift_mode=args.lift,
                          audit=args.audit, seed=args.seed, x0=x0)
        trace = run_fbipg(problem, cfg, oracle)
    else:
        alpha = args.alpha if args.alpha is not None else "1/K"
        try:
            alpha = (1.0 / max(args.iters, 1) if alpha.replace(" ", "") == "1/K"
                     else float(alpha))
        except ValueError:
            raise _UsageError(f"--alpha expects a number or 1/K, got {args.alpha!r}") from None
        if not alpha > 0:
            raise _UsageError(f"--alpha must be > 0, got {alpha}")
        trace = run_fista_fixed(problem, alpha, args.iters, oracle=oracle,
                                trace_stride=args.trace_every, audit=args.audit,
                                seed=args.seed, x0=x0, lift_mode=args.lift)

    os.makedirs(args.out, exist_ok=True)
    trace.to_csv(os.path.join(args.out, "trace.csv"))
    result = {"algo": trace.meta["algo"], "gamma": trace.meta["gamma"], "a": trace.meta["a"],
              "alpha": trace.meta["alpha"], "K": trace.meta["K"],
              "t_mode": trace.meta["t_mode"], "beta": trace.meta["beta"],
              "lifted": trace.meta["lifted"],
              "x_final": [float(v) for v in trace.problem.x_block(trace.x_final)]}
    failures = 0
    lines = []
    if args.audit:
        reports = [trace.audit]
        theory = _theory_report(trace, oracle, problem)
        if theory is not None:
            reports.append(theory)
        for rep in reports:
            lines.extend(rep.lines())
            failures += rep.failures
        result["audit"] = {"passes": sum(r.passes for r in reports), "failures": failures,
                           "regime": None if theory is None else theory.regime}
    _write_json(os.path.join(args.out, "result.json"), result)
    for line in lines:
        print(line)
    print(f"final phi={trace.last('phi')!r} omega={trace.last('omega')!r}")
    return EXIT_AUDIT if failures else EXIT_OK


def _theory_report(trace, oracle, problem):
    """Rate-bound audit, when the run and the oracle support one."""
    if (oracle is None or oracle.x_prime is None or oracle.omega_star_inf is None
            or oracle.phi_star is None or trace.meta["lifted"] or trace.meta["K"] < 1):
        return None
    algo = trace.meta["algo"]
    if algo == "fbipg" and trace.meta["t_mode"] != "explicit":
        return None
    gamma = trace.meta["gamma"] or 1.0
    holder_ok = oracle.tau is not None and oracle.rho is not None
    regime = regime_for(algo, gamma, holder_ok)
    R2 = oracle.R2
    if R2 is None:
        R2 = float(oracle.x_prime @ oracle.x_prime)
    params = rates.RateParams(a=trace.meta["a"] or 2, gamma=gamma, beta=problem.beta, R2=R2,
                              delta_omega=max(oracle.omega_xprime - oracle.omega_star_inf, 0.0),
                              tau=oracle.tau, rho=oracle.rho)
    return audit_trace(trace, oracle, params, regime)


def cmd_validate(args):
    checks = run_suite(args.suite, seed=args.seed)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.ok for c in checks) else EXIT_AUDIT


def cmd_compare(args):
    if not os.path.exists(args.config):
        raise _UsageError(f"--config: file not found: {args.config}")
    try:
        out = run_experiment(args.config)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise _UsageError(f"--config: {exc}") from None
    with open(os.path.join(out, "summary.json")) as fh:
        summary = json.load(fh)
    failures = 0
    for i, r in enumerate(summary["runs"]):
        failures += r["audit"]["failures"]
        print(f"run {i}: algo={r['algo']} gamma={r['gamma']} a={r['a']} alpha={r['alpha']} "
              f"final_phi_gap={r['final_phi_gap']} audit={r['audit']}")
    return EXIT_AUDIT if failures else EXIT_OK


COMMANDS = {"gen": cmd_gen, "oracle": cmd_oracle, "solve": cmd_solve,
            "validate": cmd_validate, "compare": cmd_compare}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fbipg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecError, ConfigurationError) as exc:
        print(f"fbipg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"fbipg {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT


if __name__ == "__main__":
    sys.exit(main())
