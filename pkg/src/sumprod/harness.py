"""Set families, growth experiments and the self-verification suite behind the CLI."""

from __future__ import annotations

import csv
import json
import math
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, TextIO

import numpy as np

from .errors import BudgetExceeded, InvalidSpec, SumProductError
from .setops import IntSet, iterated_sumset, product_set_exp

DEFAULT_BUDGET = 10**7
SCALES = ("tiny", "small", "full")


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    params: tuple = ()

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    def __str__(self) -> str:
        def fmt(v):
            if isinstance(v, (list, tuple)):
                return "[" + ",".join(str(x) for x in v) + "]"
            return str(v)

        return self.kind + ":" + ",".join(f"{k}={fmt(v)}" for k, v in self.params)


_KINDS = {
    "ap": ("start", "step", "n"),
    "gp": ("base", "n", "start"),
    "multiplicative_grid": ("primes", "bounds"),
    "random_interval": ("n", "lo", "width", "seed"),
    "explicit": ("values",),
}


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise InvalidSpec(f"unbalanced list {text!r}")
        return tuple(int(x) for x in re.split(r"[,\s]+", text[1:-1].strip()) if x)
    try:
        return int(text)
    except ValueError as err:
        raise InvalidSpec(f"not an integer: {text!r}") from err


def parse_family(text: str) -> FamilySpec:
    """Parse ``kind:key=value,...``; list values use brackets, e.g. ``primes=[2,3]``.

    Positional values are accepted in the documented order, so ``ap:1,1,8``
    equals ``ap:start=1,step=1,n=8``.
    """
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind not in _KINDS:
        raise InvalidSpec(f"unknown family {kind!r}; expected one of {sorted(_KINDS)}")
    names = _KINDS[kind]
    params: dict = {}
    for i, part in enumerate(_split_top(rest)):
        if "=" in part:
            key, value = part.split("=", 1)
            key = key.strip()
        else:
            if i >= len(names):
                raise InvalidSpec(f"too many positional values for {kind}")
            key, value = names[i], part
        if key not in names:
            raise InvalidSpec(f"{kind} takes {names}, got {key!r}")
        params[key] = _parse_value(value)
    return FamilySpec(kind, tuple((k, params[k]) for k in names if k in params))


def generate_family(spec: FamilySpec | str) -> IntSet:
    """Deterministic integer set for a family spec; raises InvalidSpec on bad parameters."""
    if isinstance(spec, str):
        spec = parse_family(spec)
    p = dict(spec.params)

    def need(*keys):
        missing = [k for k in keys if k not in p]
        if missing:
            raise InvalidSpec(f"{spec.kind} needs {missing}")

    if spec.kind == "ap":
        need("n")
        start, step, n = p.get("start", 1), p.get("step", 1), p["n"]
        if n < 1 or step < 1 or start < 1:
            raise InvalidSpec("ap needs start, step, n >= 1")
        values = [start + i * step for i in range(n)]
    elif spec.kind == "gp":
        need("base", "n")
        base, n, start = p["base"], p["n"], p.get("start", 1)
        if base < 2 or n < 1 or start < 1:
            raise InvalidSpec("gp needs base >= 2, n >= 1, start >= 1")
        values = [start * base**i for i in range(n)]
    elif spec.kind == "multiplicative_grid":
        need("primes", "bounds")
        primes, bounds = p["primes"], p["bounds"]
        if isinstance(primes, int):
            primes = (primes,)
        if isinstance(bounds, int):
            bounds = (bounds,) * len(primes)
        if len(primes) != len(bounds) or any(b < 1 for b in bounds):
            raise InvalidSpec("multiplicative_grid needs one bound >= 1 per prime")
        values = [1]
        for q, b in zip(primes, bounds):
            values = [v * q**e for v in values for e in range(b)]
    elif spec.kind == "random_interval":
        need("n", "width")
        n, width, lo, seed = p["n"], p["width"], p.get("lo", 1), p.get("seed", 0)
        if n < 1 or width < n or lo < 1:
            raise InvalidSpec("random_interval needs 1 <= n <= width and lo >= 1")
        rng = np.random.default_rng(seed)
        values = (lo + rng.choice(width, size=n, replace=False)).tolist()
    else:
        need("values")
        values = list(p["values"]) if isinstance(p["values"], tuple) else [p["values"]]
        if any(v < 1 for v in values):
            raise InvalidSpec("explicit values must be positive")
    out = IntSet.of(values)
    return out


# ---------------------------------------------------------------------------
# growth experiments


@dataclass
class ExperimentResult:
    family: str
    N: int
    rows: list[tuple[int, int, int]]
    verdict: str
    runtime: float = 0.0
    remark2: dict | None = None
    truncated: bool = False

    def exponent(self, size: int) -> float:
        return math.log(size) / math.log(self.N) if self.N > 1 else 0.0

    def table(self) -> list[dict]:
        return [
            {"k": k, "sumset": s, "productset": p,
             "log_N_sumset": round(self.exponent(s), 12), "log_N_productset": round(self.exponent(p), 12)}
            for k, s, p in self.rows
        ]

    def to_json(self) -> dict:
        out = {"family": self.family, "N": self.N, "rows": self.table(), "verdict": self.verdict,
               "truncated": self.truncated}
        if self.remark2 is not None:
            out["remark2"] = self.remark2
        return out

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "sumset_size", "productset_size", "log_N_sumset", "log_N_productset"])
        for r in self.table():
            w.writerow([r["k"], r["sumset"], r["productset"], r["log_N_sumset"], r["log_N_productset"]])


def _check_rows(rows, N: int) -> None:
    for (k0, s0, p0), (k1, s1, p1) in zip(rows, rows[1:]):
        if s1 < s0 or p1 < p0:
            raise SumProductError(f"growth columns decreased between k={k0} and k={k1}: {rows}")
    for k, s, p in rows:
        cap = math.comb(N + k - 1, k)
        if s > cap or p > cap:
            raise SumProductError(f"size above C(N+k-1, k) = {cap} at k={k}: {(s, p)}")


def _verdict(rows) -> str:
    if not rows:
        return "none"
    k, s, p = rows[-1]
    if s == p:
        return "tie"
    return "sum" if s > p else "product"


def run_growth_experiment(spec: FamilySpec | str, k_max: int = 4, budget: int | None = DEFAULT_BUDGET,
                          remark2_delta: float | None = None, seed: int = 0) -> ExperimentResult:
    """Exact |kA| and |A^(k)| for k = 1..k_max.

    Raises BudgetExceeded carrying the partial ExperimentResult when a
    stage would exceed ``budget`` elements.  With ``remark2_delta`` a
    random subset of size ceil(N^delta') is drawn and its product growth is
    reported next to A's.
    """
    if k_max < 2:
        raise InvalidSpec("k_max must be at least 2")
    t0 = time.perf_counter()
    if isinstance(spec, str):
        spec = parse_family(spec)
    A = generate_family(spec)
    N = len(A)
    rows: list[tuple[int, int, int]] = []
    result = ExperimentResult(str(spec), N, rows, "none")
    try:
        for k in range(1, k_max + 1):
            s = len(iterated_sumset(A, k, budget=budget))
            p = len(product_set_exp(A.elements, k, budget=budget))
            rows.append((k, s, p))
    except BudgetExceeded as err:
        result.truncated = True
        result.verdict = _verdict(rows)
        result.runtime = time.perf_counter() - t0
        raise BudgetExceeded(str(err), partial=result) from err
    _check_rows(rows, N)
    result.verdict = _verdict(rows)
    if remark2_delta is not None:
        result.remark2 = _remark2(A, remark2_delta, k_max, budget, seed, rows)
    result.runtime = time.perf_counter() - t0
    return result


def _remark2(A: IntSet, delta_prime: float, k_max: int, budget, seed: int, rows) -> dict:
    N = len(A)
    size = min(N, max(1, math.ceil(N ** delta_prime)))
    rng = np.random.default_rng([seed, 2])
    idx = sorted(rng.choice(N, size=size, replace=False).tolist())
    A1 = [A.elements[i] for i in idx]
    sub_rows = []
    for k in range(1, k_max + 1):
        sub_rows.append((k, len(product_set_exp(A1, k, budget=budget))))
    holds = all(p1 <= p for (_, p1), (_, _, p) in zip(sub_rows, rows))
    return {"delta_prime": delta_prime, "subset": A1, "productset": [p for _, p in sub_rows],
            "subset_below_full": holds}


# ---------------------------------------------------------------------------
# verification suite


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)


@dataclass
class VerifyReport:
    seed: int
    scale: str
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "scale": self.scale,
            "passed": self.passed,
            "checks": [{"name": c.name, "pass": c.passed, "measured": c.measured} for c in self.checks],
        }

    def dumps(self) -> str:
        return json.dumps(_rounded(self.to_json()), indent=2, sort_keys=True)


def _rounded(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_SIZES = {"tiny": 1, "small": 3, "full": 10}


def _rank_fraction(rows) -> int:
    """Plain Gaussian elimination over the rationals (independent of the Bareiss routine)."""
    M = [[Fraction(x) for x in r] for r in rows]
    rank = 0
    ncols = len(M[0]) if M else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(M)) if M[r][c] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for r in range(len(M)):
            if r != rank and M[r][c] != 0:
                f = M[r][c] / M[rank][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[rank])]
        rank += 1
    return rank


def verify_suite(seed: int = 0, scale: str = "tiny", tamper: bool = False) -> VerifyReport:
    """Run every module's invariants at the given scale.

    ``tamper`` flips the Parseval check so that it demands a value other
    than 1; the suite must then fail, which tests the tester.
    """
    from .bounds import (base_pair, check_admissible, compute_Lambda, lemma43_pair, lemma51_pair,
                         pigeonhole_chain, theorem_driver)
    from .exponent_lattice import embed_set, evaluate, factorize, random_expset, PrimeBasis
    from .lambda_q import CoefficientVector, lambda_lower_bound, trig_norm
    from .regularize import freiman_dimension, regularize, select_injective_coords
    from .regularize_audit import audit_regularization
    from .setops import additive_energy, random_graph, representation_counts, ruzsa_audit

    if scale not in SCALES:
        raise InvalidSpec(f"scale must be one of {SCALES}")
    reps = _SIZES[scale]
    checks: list[CheckResult] = []

    def run(name: str, fn: Callable[[np.random.Generator], tuple[bool, dict]]):
        rng = np.random.default_rng([seed, len(checks)])
        try:
            ok, measured = fn(rng)
        except Exception as err:  # a crash is a failed check, not a crashed suite
            ok, measured = False, {"error": f"{type(err).__name__}: {err}"}
        checks.append(CheckResult(name, bool(ok), measured))

    def lattice_roundtrip(rng):
        basis = PrimeBasis((2, 3, 5, 7))
        bad = 0
        for _ in range(20 * reps):
            v = tuple(int(x) for x in rng.integers(0, 6, size=4))
            bad += factorize(evaluate(v, basis), basis) != v
        return bad == 0, {"failures": bad}

    def product_sum(rng):
        worst = 0
        for _ in range(5 * reps):
            A = rng.choice(np.arange(1, 2001), size=int(rng.integers(2, 10)), replace=False).tolist()
            k = int(rng.integers(2, 4))
            direct = {1}
            for _ in range(k):
                direct = {x * a for x in direct for a in A}
            _, E = embed_set(A)
            worst = max(worst, abs(len(direct) - len(iterated_sumset(E, k))))
        return worst == 0, {"max_size_gap": worst}

    def engines_agree(rng):
        ok = True
        for _ in range(5 * reps):
            A = rng.choice(400, size=int(rng.integers(2, 15)), replace=False).tolist()
            h = int(rng.integers(2, 4))
            ok &= representation_counts(A, h, "hash") == representation_counts(A, h, "convolution")
        return ok, {}

    def ruzsa(rng):
        ok = True
        for _ in range(10 * reps):
            A = rng.choice(np.arange(1, 500), size=int(rng.integers(2, 20)), replace=False).tolist()
            ok &= ruzsa_audit(A).holds
        return ok, {}

    def parseval(rng):
        worst = 0.0
        for _ in range(2 * reps):
            A = rng.choice(1000, size=int(rng.integers(2, 12)), replace=False).tolist()
            est = lambda_lower_bound(A, 2, restarts=2, seed=seed)
            worst = max(worst, abs(est.lower - 1.0))
        ok = worst > 1e-9 if tamper else worst <= 1e-9
        return ok, {"max_deviation": worst, "tampered": tamper}

    def uniform_moment(rng):
        worst = 0.0
        for _ in range(3 * reps):
            A = sorted(rng.choice(300, size=int(rng.integers(2, 12)), replace=False).tolist())
            N = len(A)
            val = trig_norm(A, CoefficientVector.uniform(A), 4)
            want = (additive_energy(A, 2) / N**2) ** 0.25
            worst = max(worst, abs(val - want) / want)
        return worst <= 1e-6, {"max_rel_error": worst}

    def regularization(rng):
        basis = PrimeBasis((2, 3, 5, 7))
        ok = True
        sizes = []
        for _ in range(reps):
            A1 = random_expset(basis, 32, 3, rng)
            A2 = random_expset(basis, 32, 3, rng)
            G = random_graph(A1, A2, 0.5, rng)
            rep = regularize(G, 0.4)
            audit = audit_regularization(G, rep, 0.4, seed=seed)
            ok &= rep.passed and audit.agree
            sizes.append(len(rep.G_final))
        return ok, {"final_sizes": sizes}

    def injective(rng):
        basis = PrimeBasis((2, 3, 5, 7, 11))
        ok = True
        for _ in range(5 * reps):
            S = random_expset(basis, int(rng.integers(1, 20)), 3, rng)
            idx = select_injective_coords(S)
            vecs = S.elements
            inj = len({tuple(v[i] for i in idx) for v in vecs}) == len(vecs)
            minimal = len(idx) == 1 or all(
                len({tuple(v[i] for i in idx if i != j) for v in vecs}) < len(vecs) for j in idx)
            rows = [[a - b for a, b in zip(v, vecs[0])] for v in vecs[1:]]
            rank_ok = freiman_dimension(S) == (_rank_fraction(rows) if rows else 0)
            ok &= inj and minimal and rank_ok
        return ok, {}

    def bound_calculus(rng):
        samplers = {name: check_admissible(p).passed for name, p in
                    (("base", base_pair()), ("iterated", lemma43_pair(0.1)),
                     ("large_N", lemma51_pair(0.25, 0.25)))}
        lam = compute_Lambda(Fraction(1, 2), Fraction(1, 2), 4, {"A1": 2, "A2": 3, "B1": 1, "B2": 2})
        chain_ok = True
        for _ in range(20 * reps):
            sizes = np.cumsum(rng.integers(0, 50, size=int(rng.integers(2, 7)))) + int(rng.integers(1, 20))
            res = pigeonhole_chain(sizes.tolist())
            chain_ok &= float(res.ratio) <= res.geometric_mean * (1 + 1e-12)
        ok = all(samplers.values()) and lam.value == 20 and all(lam.consequences.values()) and chain_ok
        return ok, {"samplers": samplers, "Lambda_example": float(lam.value)}

    def dichotomy(rng):
        gp = theorem_driver(generate_family("gp:base=2,n=16").elements, k_max=2)
        ap = theorem_driver(generate_family("ap:start=1,step=1,n=16").elements, k_max=2)
        ok = gp.verdict == "sum" and gp.growth[1][1] == 136 and ap.verdict == "product" and ap.growth[1][1] == 31
        return ok, {"gp_2A": gp.growth[1][1], "ap_2A": ap.growth[1][1]}

    def growth_table(rng):
        res = run_growth_experiment("gp:base=2,n=8", k_max=2)
        return res.rows[1][1:] == (36, 15), {"rows": res.rows}

    run("lattice_roundtrip", lattice_roundtrip)
    run("product_equals_lattice_sumset", product_sum)
    run("representation_engines_agree", engines_agree)
    run("ruzsa_inequality", ruzsa)
    run("parseval_q2", parseval)
    run("uniform_fourth_moment", uniform_moment)
    run("regularization_audit", regularization)
    run("injective_coords_and_rank", injective)
    run("bound_calculus", bound_calculus)
    run("dichotomy_examples", dichotomy)
    run("growth_table", growth_table)
    return VerifyReport(seed, scale, checks)
