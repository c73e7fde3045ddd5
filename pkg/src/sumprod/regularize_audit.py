"""Independent recount of a regularization report.

Deliberately self-contained: nothing here is imported from the
constructor.  Given the input graph and the sets a report claims to have
chosen, every structural property and ledger value is recomputed from the
raw edge list and compared against the report.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction


def _log_floor(x: float) -> float:
    if x <= 0:
        return 1.0
    v = math.log(x)
    return v if v > 1.0 else 1.0


def _exact_delta(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def _group(vectors, t):
    out = {}
    for v in vectors:
        out.setdefault(tuple(v[:t]), []).append(tuple(v))
    return out


def _close(a: float, b: float, rel: float = 1e-9) -> bool:
    if a == b:
        return True
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


@dataclass
class AuditResult:
    agree: bool
    checks: dict = field(default_factory=dict)
    mismatches: list = field(default_factory=list)
    recomputed: dict = field(default_factory=dict)


def audit_regularization(G, report, delta, blocks: int = 64, seed: int = 0) -> AuditResult:
    """Recompute the report's claims from G.

    ``G`` is the input BipartiteGraph, ``report`` a RegularizationReport.
    Checks: the Step 1 row/column scan plus ``blocks`` random blocks, fiber
    regularity and dyadic retention of both regular sets, the class
    membership of every retained base pair, the retained graph, and the
    lhs/rhs of the main ledger entries.
    """
    L = [tuple(v) for v in G.left.elements]
    R = [tuple(v) for v in G.right.elements]
    edges = {(L[i], R[j]) for i, j in G.edges}
    n1_in, n2_in = len(L), len(R)
    sums = set()
    for u, v in edges:
        sums.add(tuple(a + b for a, b in zip(u, v)))
    K = len(sums) / math.sqrt(n1_in * n2_in)
    d_exact = _exact_delta(delta)
    d = float(d_exact)
    loss = _log_floor(K / d)

    if report.swapped:
        L, R = R, L
        edges = {(v, u) for u, v in edges}
    N1, N2 = len(L), len(R)
    T = (N1 * N2) ** 0.25

    checks: dict[str, bool] = {}
    got: dict[str, tuple[float, float]] = {}

    # Step 1 -----------------------------------------------------------
    s1 = report.step1
    A1p = [tuple(v) for v in (s1.A2 if report.swapped else s1.A1)]
    A2p = [tuple(v) for v in (s1.A1 if report.swapped else s1.A2)]
    in1, in2 = set(A1p), set(A2p)
    core = {(u, v) for u, v in edges if u in in1 and v in in2}
    rowdeg = {u: 0 for u in A1p}
    coldeg = {v: 0 for v in A2p}
    for u, v in core:
        rowdeg[u] += 1
        coldeg[v] += 1
    n1p, n2p = len(A1p), len(A2p)
    checks["rows_dense"] = all(4 * c * d_exact.denominator > d_exact.numerator * n2p for c in rowdeg.values())
    checks["cols_dense"] = all(4 * c * d_exact.denominator > d_exact.numerator * n1p for c in coldeg.values())
    rng = random.Random(seed)
    block_ok = True
    for _ in range(blocks):
        B1 = rng.sample(A1p, rng.randint(1, n1p))
        B2 = rng.sample(A2p, rng.randint(1, n2p))
        block_ok &= 4 * sum(rowdeg[u] for u in B1) > d * len(B1) * n2p
        block_ok &= 4 * sum(coldeg[v] for v in B2) > d * len(B2) * n1p
    checks["random_blocks"] = bool(block_ok)
    # with swapped sides the step 1 ledger refers to the input orientation
    if report.swapped:
        got["3.9"] = (min(coldeg.values()), d / 4 * n1p)
        got["3.10"] = (min(rowdeg.values()), d / 4 * n2p)
    else:
        got["3.9"] = (min(rowdeg.values()), d / 4 * n2p)
        got["3.10"] = (min(coldeg.values()), d / 4 * n1p)
    got["3.12"] = (len(edges) - len(core), d / 4 * (N1 * N2 - n1p * n2p))
    checks["3.11"] = n1p > 0.75 * d * N1 and n2p > 0.75 * d * N2
    checks["3.12"] = got["3.12"][0] <= got["3.12"][1]

    # Steps 3-4 --------------------------------------------------------
    t = report.t_split
    A2pp = [tuple(v) for v in report.A2pp]
    A1bb = [tuple(v) for v in report.A1bb]
    A2bb = [tuple(v) for v in report.A2bb]
    m1, m2 = report.m1, report.m2
    g1 = _group(A1bb, t)
    g2 = _group(A2bb, t)
    checks["A2bb_in_core"] = set(A2bb) <= set(A2pp) <= in2
    checks["A1bb_in_core"] = set(A1bb) <= in1
    checks["A2bb_regular"] = all(m2 <= len(x) < 2 * m2 for x in g2.values())
    checks["A1bb_regular"] = all(m1 <= len(x) < 2 * m1 for x in g1.values())
    checks["M2"] = len(g2) == report.M2
    checks["M1"] = len(g1) == report.M1
    checks["N2bb_window"] = report.M2 * m2 <= len(A2bb) < 2 * report.M2 * m2
    checks["N1bb_window"] = report.M1 * m1 <= len(A1bb) < 2 * report.M1 * m1

    g1p = _group(A1p, t)
    n1t = max(len(x) for x in g1p.values())
    xbar = min((p for p in g1p if len(g1p[p]) == n1t))
    Eb = set(g1p[xbar])
    hits = {}
    for u, v in core:
        if u in Eb:
            hits[v] = hits.get(v, 0) + 1
    want = sorted(z for z in A2p if 2 * 4 * hits.get(z, 0) * d_exact.denominator > d_exact.numerator * len(Eb))
    checks["fact1_set"] = want == sorted(A2pp)

    # dyadic retention for A2: mass by edge degree inside the core
    thr2 = 1e-4 * d ** 5 * K ** -2 * n1t
    A2bar = [v for grp in _group(A2pp, t).values() if len(grp) > thr2 for v in grp]
    deg2 = {}
    for u, v in core:
        deg2[v] = deg2.get(v, 0) + 1
    checks["dyadic_m2"] = _retention_ok(A2bar, t, lambda v: deg2.get(v, 0), m2, A2bb)
    set2 = set(A2bb)
    deg1 = {}
    for u, v in core:
        if v in set2:
            deg1[u] = deg1.get(u, 0) + 1
    thr1 = d ** 5 * K ** -3 * m2
    A1bar = [v for grp in g1p.values() if len(grp) > thr1 for v in grp]
    checks["dyadic_m1"] = _retention_ok(A1bar, t, lambda v: deg1.get(v, 0), m1, A1bb)

    N1bb, N2bb = len(A1bb), len(A2bb)
    got["3.24"] = (N2bb, d ** 3 / loss * N2)
    got["3.25"] = (report.M2, d ** -5 * K ** 2 * N2 / T)
    got["3.33"] = (N1bb, d ** 2 / loss ** 2 * N1)
    got["3.35"] = (report.M1, d ** -10 * K ** 5 * N1 / T)

    # Step 5 -----------------------------------------------------------
    set1 = set(A1bb)
    regular_edges = {(u, v) for u, v in core if u in set1 and v in set2}
    got["3.34"] = (len(regular_edges), d / loss ** 2 * N1bb * N2bb)
    fibers = {}
    for u, v in regular_edges:
        fibers.setdefault((u[:t], v[:t]), set()).add((u[t:], v[t:]))
    d1 = Fraction(report.delta1)
    Lsc = Fraction(report.L)
    P = m1 * m2
    in_class = []
    for key, fe in fibers.items():
        a, b = len(g1[key[0]]), len(g2[key[1]])
        rho = Fraction(len(fe), a * b)
        if d1 <= rho < 2 * d1:
            in_class.append(key)
    L0 = loss ** 4.5 * d ** -4.5 * K
    capped = []
    for key in in_class:
        s = len({tuple(x + y for x, y in zip(p, q)) for p, q in fibers[key]})
        if s < L0 * math.sqrt(P):
            capped.append(key)
    g10 = [tuple(k) for k in report.G10]
    class_ok = True
    for key in g10:
        fe = fibers.get(key)
        if not fe:
            class_ok = False
            continue
        a, b = len(g1[key[0]]), len(g2[key[1]])
        rho = Fraction(len(fe), a * b)
        s = len({tuple(x + y for x, y in zip(p, q)) for p, q in fe})
        class_ok &= d1 <= rho < 2 * d1
        class_ok &= Lsc * Lsc * P <= s * s < 4 * Lsc * Lsc * P
    checks["G10_classes"] = bool(class_ok)
    checks["G10_in_capped"] = set(g10) <= set(capped)
    delta0 = Fraction(len(g10), report.M1 * report.M2)
    checks["delta0"] = delta0 == Fraction(report.delta0)
    base_sum = {tuple(a + b for a, b in zip(x, y)) for x, y in g10}
    K0 = len(base_sum) / math.sqrt(report.M1 * report.M2)
    checks["K0"] = _close(K0, report.K0)
    tilde = {(k[0] + p, k[1] + q) for k in g10 for p, q in fibers[k]}
    checks["Gtilde"] = tilde == set(report.Gtilde)
    checks["G_final_subset"] = set(report.G_final) <= tilde and bool(report.G_final)
    got["3.38"] = (float(d1), d / loss ** 2)
    got["3.44"] = (len(g10), len(capped) / loss)
    got["3.45"] = (float(delta0), d / (float(d1) * loss ** 4))
    got["3.47"] = (K0 * float(Lsc), d ** -3 * _log_floor(K) ** 2 * K)
    got["3.50"] = (len(tilde), d / loss ** 4 * N1bb * N2bb)
    got["3.51"] = (N1bb * N2bb, d ** 5 / loss ** 3 * N1 * N2)

    # Step 7 -----------------------------------------------------------
    rootN = math.sqrt(N1 * N2)
    checks["step7_bounds"] = all(
        s.ell1 * s.ell2 < rootN and s.ell1 * s.ell2 <= min(m1 * m2, rootN)
        for s in report.step7 if not s.identity
    )

    mismatches = []
    for key, (lhs, rhs) in got.items():
        entry = report.ledger.get(key)
        if entry is None:
            mismatches.append(f"{key}: missing from report")
            continue
        if not (_close(float(lhs), entry.lhs) and _close(float(rhs), float(entry.rhs))):
            mismatches.append(f"{key}: report ({entry.lhs}, {entry.rhs}) vs recount ({lhs}, {rhs})")
    for name, ok in checks.items():
        if not ok:
            mismatches.append(f"check {name} failed")
    return AuditResult(not mismatches, checks, mismatches, {k: list(v) for k, v in got.items()})


def _retention_ok(candidates, t, weight, m, kept) -> bool:
    """The kept fibers are exactly one dyadic class, the heaviest, and hold enough mass."""
    groups = _group(candidates, t)
    if not groups:
        return False
    mass = {}
    for grp in groups.values():
        j = len(grp).bit_length() - 1
        mass[j] = mass.get(j, 0) + sum(weight(v) for v in grp)
    total = sum(mass.values())
    jm = m.bit_length() - 1
    expected = sorted(v for grp in groups.values() if m <= len(grp) < 2 * m for v in grp)
    biggest = max(len(g) for g in groups.values())
    classes = int(math.floor(math.log2(biggest))) + 1
    return (
        sorted(kept) == expected
        and mass.get(jm, 0) == max(mass.values())
        and mass.get(jm, 0) * classes >= total
    )
