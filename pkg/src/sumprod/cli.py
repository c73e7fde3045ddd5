"""``sumprod`` command-line interface.

Every subcommand prints JSON on stdout; ``--csv PATH`` additionally writes
the tabular part of the result.  Exit codes: 0 pass, 1 invariant failure,
2 usage error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .bounds import (Constants, base_pair, check_admissible, compute_k_of_b, lemma43_pair,
                     lemma51_pair, theorem_driver)
from .errors import BudgetExceeded, InvalidSpec, SumProductError
from .exponent_lattice import PrimeBasis, factorize, prime_factors, random_expset
from .harness import DEFAULT_BUDGET, SCALES, _rounded, generate_family, run_growth_experiment, verify_suite
from .lambda_q import lambda_lower_bound
from .regularize import regularize
from .regularize_audit import audit_regularization
from .setops import (IntSet, additive_energy, energy_sumset_bound, iterated_sumset, product_set_exp,
                     random_graph, representation_counts, write_counts_csv, write_growth_csv)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3
_K_BY_SCALE = {"tiny": 3, "small": 4, "full": 6}


def _set_arg(text: str) -> IntSet:
    """A family spec (``gp:base=2,n=8``) or a plain comma list of integers."""
    if ":" in text:
        return generate_family(text)
    try:
        return IntSet.of(_ints(text))
    except ValueError as err:
        raise InvalidSpec(f"cannot read a set from {text!r}") from err


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _emit(obj, args) -> None:
    indent = None if args.compact else 2
    print(json.dumps(_rounded(obj), indent=indent, sort_keys=True))


def _config(args) -> Constants:
    return Constants.from_file(args.config) if args.config else Constants()


# ---------------------------------------------------------------------------
# subcommands


def cmd_factor(args) -> int:
    out = {"n": args.n, "factors": {str(p): e for p, e in prime_factors(args.n).items()}}
    if args.basis:
        out["exponents"] = list(factorize(args.n, PrimeBasis(_ints(args.basis))))
    _emit(out, args)
    return EXIT_OK


def _growth_rows(A, k_max, budget, which):
    rows = []
    for k in range(1, k_max + 1):
        s = len(iterated_sumset(A, k, budget=budget)) if which in ("sum", "both") else 0
        p = len(product_set_exp(A.elements, k, budget=budget)) if which in ("prod", "both") else 0
        rows.append((k, s, p))
    return rows


def cmd_sumset(args) -> int:
    A = _set_arg(args.set)
    S = iterated_sumset(A, args.k, budget=args.budget)
    out = {"N": len(A), "k": args.k, "size": len(S)}
    if args.elements:
        out["elements"] = list(S.elements)
    if args.csv:
        with open(args.csv, "w") as fh:
            write_growth_csv(_growth_rows(A, args.k, args.budget, "sum"), fh)
    _emit(out, args)
    return EXIT_OK


def cmd_prodset(args) -> int:
    A = _set_arg(args.set)
    P = product_set_exp(A.elements, args.k, budget=args.budget)
    out = {"N": len(A), "k": args.k, "size": len(P), "basis": list(P.basis.primes)}
    if args.elements:
        out["elements"] = P.to_ints()
    if args.csv:
        with open(args.csv, "w") as fh:
            write_growth_csv(_growth_rows(A, args.k, args.budget, "prod"), fh)
    _emit(out, args)
    return EXIT_OK


def cmd_energy(args) -> int:
    A = _set_arg(args.set)
    bound = energy_sumset_bound(A.elements, args.h)
    out = {
        "N": len(A),
        "h": args.h,
        "energy": additive_energy(A.elements, args.h),
        "sumset_size": bound.sumset_size,
        "lower_bound": str(bound.lower),
        "holds": bound.holds,
    }
    if args.csv:
        with open(args.csv, "w") as fh:
            write_counts_csv(representation_counts(A.elements, args.h), fh)
    _emit(out, args)
    return EXIT_OK if bound.holds else EXIT_FAIL


def cmd_lambda(args) -> int:
    A = _set_arg(args.set)
    est = lambda_lower_bound(A, args.q, restarts=args.restarts, max_iters=args.max_iters,
                             seed=args.seed, workers=args.workers)
    out = est.to_json()
    out["monotone_histories"] = est.diagnostics.get("histories_monotone", True)
    _emit(out, args)
    return EXIT_OK if out["monotone_histories"] else EXIT_FAIL


def cmd_regularize(args) -> int:
    rng = np.random.default_rng(args.seed)
    basis = PrimeBasis(_ints(args.primes))
    A1 = random_expset(basis, args.n, args.max_exp, rng)
    A2 = random_expset(basis, args.n, args.max_exp, rng)
    G = random_graph(A1, A2, args.p, rng)
    rep = regularize(G, args.delta)
    audit = audit_regularization(G, rep, args.delta, seed=args.seed)
    out = rep.to_json()
    out["audit"] = {"agree": audit.agree, "mismatches": audit.mismatches}
    _emit(out, args)
    return EXIT_OK if rep.passed and audit.agree else EXIT_FAIL


def cmd_bounds(args) -> int:
    cfg = _config(args)
    if args.pair == "base":
        pair = base_pair(cfg.q, cfg.C)
    elif args.pair == "iterated":
        pair = lemma43_pair(args.gamma, cfg.q, cfg.C)
    else:
        pair = lemma51_pair(args.tau, args.gamma, cfg.loglog_nbar, cfg.q, cfg.C0, cfg.c_exp, cfg.rho)
    ln_n = args.ln_n if args.ln_n is not None else math.log(args.N)
    out = {"evaluation": pair.evaluate(ln_n=ln_n, delta=args.delta, K=args.K)}
    sampler = check_admissible(pair)
    out["sampler"] = {"passed": sampler.passed, "failures": sampler.failures, "points": sampler.points}
    if args.k_of_b:
        out["k_of_b"] = compute_k_of_b(args.k_of_b, remark_C=args.remark_c)
    _emit(out, args)
    return EXIT_OK if sampler.passed else EXIT_FAIL


def cmd_experiment(args) -> int:
    k_max = args.k_max or _K_BY_SCALE[args.scale]
    try:
        res = run_growth_experiment(args.family, k_max=k_max, budget=args.budget,
                                    remark2_delta=args.remark2, seed=args.seed)
    except BudgetExceeded as err:
        partial = err.partial
        out = partial.to_json() if partial is not None else {}
        out["budget_exceeded"] = str(err)
        if args.csv and partial is not None:
            with open(args.csv, "w") as fh:
                partial.write_csv(fh)
        _emit(out, args)
        return EXIT_BUDGET
    out = res.to_json()
    if args.driver:
        out["driver"] = theorem_driver(generate_family(args.family).elements, b=args.b,
                                       k_max=k_max, budget=args.budget).to_json()
    if args.csv:
        with open(args.csv, "w") as fh:
            res.write_csv(fh)
    _emit(out, args)
    ok = res.remark2 is None or res.remark2["subset_below_full"]
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    rep = verify_suite(args.seed, args.scale, tamper=args.tamper)
    print(rep.dumps())
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed (u64)")
    common.add_argument("--config", help="key = value constants file")
    common.add_argument("--csv", help="also write the tabular result here")
    common.add_argument("--json", action="store_true", help="JSON on stdout (the default; kept for scripts)")
    common.add_argument("--compact", action="store_true", help="single-line JSON")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="max elements per k-fold stage")
    common.add_argument("--scale", choices=SCALES, default="small")

    parser = argparse.ArgumentParser(prog="sumprod", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factor", parents=[common], help="factor an integer")
    p.add_argument("n", type=int)
    p.add_argument("--basis", help="comma list of primes; prints the exponent vector")
    p.set_defaults(func=cmd_factor)

    for name, func, helptext in (("sumset", cmd_sumset, "k-fold sumset size"),
                                 ("prodset", cmd_prodset, "k-fold product set size")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("set", help="family spec or comma list")
        p.add_argument("-k", type=int, default=2)
        p.add_argument("--elements", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("energy", parents=[common], help="additive energy E_h")
    p.add_argument("set")
    p.add_argument("--h", type=int, default=2)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("lambda", parents=[common], help="lower bound for the Lambda(q) constant")
    p.add_argument("set")
    p.add_argument("--q", type=float, default=4.0)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("regularize", parents=[common], help="regularize a random bipartite graph")
    p.add_argument("--primes", default="2,3,5,7")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--max-exp", type=int, default=3)
    p.add_argument("--p", type=float, default=0.4, help="edge probability")
    p.add_argument("--delta", type=float, default=0.3)
    p.set_defaults(func=cmd_regularize)

    p = sub.add_parser("bounds", parents=[common], help="evaluate an admissible pair")
    p.add_argument("--pair", choices=("base", "iterated", "large_N"), default="base")
    p.add_argument("--N", type=float, default=1e6)
    p.add_argument("--ln-n", type=float, help="natural log of N, for N beyond double range")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--k-of-b", type=int)
    p.add_argument("--remark-c", type=int)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("experiment", parents=[common], help="growth table for a set family")
    p.add_argument("family")
    p.add_argument("--k-max", type=int)
    p.add_argument("--remark2", type=float, help="also track a random subset of size N^delta'")
    p.add_argument("--driver", action="store_true", help="add the doubling-chain verdict")
    p.add_argument("--b", type=int, default=2)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.add_argument("--tamper", action="store_true", help="invert one check to test the tester")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidSpec, FileNotFoundError) as err:
        print(f"sumprod: {err}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as err:
        print(f"sumprod: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except SumProductError as err:
        print(f"sumprod: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
