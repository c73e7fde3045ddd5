"""Regularization of a dense bipartite graph between two sets of exponent vectors.

The pipeline takes G in A1 x A2 with |G| > delta N1 N2 and produces, step by
step:

1. dense cores A1', A2' in which every vertex keeps a delta/4 share of its
   row or column;
2. a split of the prime basis into a prefix (the first t' primes) and a tail;
3. and 4. subsets of A2' and A1' whose fibers over the prefix all have a
   common dyadic size m2 or m1;
5. a base graph G10 of prefix pairs whose fiber graphs share a dyadic edge
   density delta1 and a dyadic sumset scale L;
7. the same construction applied once more inside every fiber graph,
   splitting off the next prime.

Unspecified constants c, C are never fixed.  Each inequality goes into
a ledger with its measured ratio lhs/rhs, so a reader can see how much room
each step left.  Logarithmic losses use lg(x) = max(log x, 1).
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DensityTooLow,
    EmptyAfterRegularization,
    HypothesisFails,
    NoValidSplit,
    SumProductError,
)
from .exponent_lattice import ExpSet
from .setops import BipartiteGraph, IntSet, difference_set

Vector = tuple[int, ...]


def lg(x: float) -> float:
    return max(math.log(x), 1.0) if x > 0 else 1.0


def as_fraction(x) -> Fraction:
    """Exact value of a density; floats go through their shortest repr, so 0.3 is 3/10."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def floor_log2_ratio(p: int, q: int) -> int:
    """floor(log2(p/q)) for positive integers, exactly."""
    if p <= 0 or q <= 0:
        raise SumProductError("ratio must be positive")
    j = p.bit_length() - q.bit_length()
    if j >= 0:
        if p < (q << j):
            j -= 1
    elif (p << -j) < q:
        j -= 1
    return j


def dyadic(j: int) -> Fraction:
    return Fraction(2) ** j


# ---------------------------------------------------------------------------
# ledger


@dataclass
class LedgerEntry:
    """One measured inequality.

    kind is "lower_c" (lhs > c rhs for an unspecified c; passes when the
    measured ratio is positive), "upper_C" (lhs < C rhs; passes when the
    ratio is finite), or an exact comparison: "gt", "lt", "le", "window".
    """

    lhs: float
    rhs: object
    kind: str
    measured_ratio: float
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        out = {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "measured_ratio": self.measured_ratio,
            "pass": self.passed,
            "kind": self.kind,
        }
        if self.note:
            out["note"] = self.note
        return out


def _ratio(lhs, rhs) -> float:
    lhs, rhs = float(lhs), float(rhs)
    if rhs == 0:
        return math.inf if lhs > 0 else 0.0
    return lhs / rhs


def lower_c(lhs, rhs, note="") -> LedgerEntry:
    r = _ratio(lhs, rhs)
    return LedgerEntry(float(lhs), float(rhs), "lower_c", r, math.isfinite(r) and r > 0 or r == math.inf, note)


def upper_c(lhs, rhs, note="") -> LedgerEntry:
    r = _ratio(lhs, rhs)
    return LedgerEntry(float(lhs), float(rhs), "upper_C", r, math.isfinite(r), note)


def exact(lhs, rhs, op: str, note="") -> LedgerEntry:
    ok = {"gt": lhs > rhs, "lt": lhs < rhs, "le": lhs <= rhs, "ge": lhs >= rhs}[op]
    return LedgerEntry(float(lhs), float(rhs), op, _ratio(lhs, rhs), bool(ok), note)


def window(value, lo, hi, lo_open=True, hi_open=True, note="") -> LedgerEntry:
    ok_lo = value > lo if lo_open else value >= lo
    ok_hi = value < hi if hi_open else value <= hi
    return LedgerEntry(float(value), [float(lo), float(hi)], "window",
                       _ratio(value, lo) if lo else math.inf, bool(ok_lo and ok_hi), note)


# ---------------------------------------------------------------------------
# small helpers on tuples


def _rebuild(like, elements):
    if isinstance(like, ExpSet):
        return ExpSet(like.basis, tuple(elements))
    return IntSet(tuple(elements))


def _fibers(S: Iterable[Vector], t: int) -> dict[Vector, list[Vector]]:
    out: dict[Vector, list[Vector]] = defaultdict(list)
    for v in S:
        out[v[:t]].append(v)
    return dict(sorted(out.items()))


def _edge_counts(E: Iterable[tuple[Vector, Vector]], left=None, right=None) -> int:
    if left is None and right is None:
        return sum(1 for _ in E)
    return sum(1 for u, v in E if (left is None or u in left) and (right is None or v in right))


def _sum_vectors(a: Vector, b: Vector) -> Vector:
    return tuple(x + y for x, y in zip(a, b))


def _graph_doubling(E, n1: int, n2: int) -> float:
    sums = {_sum_vectors(u, v) for u, v in E}
    return len(sums) / math.sqrt(n1 * n2)


def _graph_parts(G: BipartiteGraph):
    L, R = G.left.elements, G.right.elements
    if not isinstance(G.left, ExpSet):
        L = tuple((x,) for x in L)
        R = tuple((x,) for x in R)
    E = {(L[i], R[j]) for i, j in G.edges}
    return list(L), list(R), E


# ---------------------------------------------------------------------------
# Step 1


@dataclass
class DensityRegularization:
    A1: tuple
    A2: tuple
    removed: list[tuple[str, object]]
    delta: Fraction
    audit: dict[str, LedgerEntry]

    @property
    def N1(self) -> int:
        return len(self.A1)

    @property
    def N2(self) -> int:
        return len(self.A2)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.audit.values())


def _step1(A1: Sequence, A2: Sequence, E: set, delta: Fraction) -> DensityRegularization:
    n1, n2 = len(A1), len(A2)
    if len(E) * delta.denominator <= delta.numerator * n1 * n2:
        raise DensityTooLow(f"|G| = {len(E)} is not above delta N1 N2 = {float(delta) * n1 * n2}")
    i1 = {v: i for i, v in enumerate(A1)}
    i2 = {v: j for j, v in enumerate(A2)}
    M = np.zeros((n1, n2), dtype=np.int64)
    for u, v in E:
        M[i1[u], i2[v]] = 1
    rows = np.ones(n1, dtype=bool)
    cols = np.ones(n2, dtype=bool)
    rdeg = M.sum(axis=1)
    cdeg = M.sum(axis=0)
    num, den = delta.numerator, delta.denominator
    removed: list[tuple[str, object]] = []
    # a vertex violates when deg <= delta/4 * (size of the other side); degrees
    # are integers, so compare against the exact floor of the threshold
    while rows.any() and cols.any():
        bad = np.flatnonzero(rows & (rdeg <= (num * int(cols.sum())) // (4 * den)))
        if bad.size:
            i = int(bad[0])
            rows[i] = False
            cdeg -= M[i]
            removed.append(("left", A1[i]))
            continue
        bad = np.flatnonzero(cols & (cdeg <= (num * int(rows.sum())) // (4 * den)))
        if bad.size:
            j = int(bad[0])
            cols[j] = False
            rdeg -= M[:, j]
            removed.append(("right", A2[j]))
            continue
        break
    A1p = tuple(A1[i] for i in np.flatnonzero(rows))
    A2p = tuple(A2[j] for j in np.flatnonzero(cols))
    if not A1p or not A2p:
        raise EmptyAfterRegularization("density regularization emptied a side")
    n1p, n2p = len(A1p), len(A2p)
    d = float(delta)
    inside = int(M[np.ix_(rows, cols)].sum())
    audit = {
        "3.9": exact(int(rdeg[rows].min()), d / 4 * n2p, "gt", "min row degree inside the core"),
        "3.10": exact(int(cdeg[cols].min()), d / 4 * n1p, "gt", "min column degree inside the core"),
        "3.11": exact(min(n1p / n1, n2p / n2), 3 * d / 4, "gt", "min N_i'/N_i"),
        "3.12": exact(len(E) - inside, d / 4 * (n1 * n2 - n1p * n2p), "le", "edges outside the core"),
    }
    return DensityRegularization(A1p, A2p, removed, delta, audit)


def step1_density_regularize(G: BipartiteGraph, delta) -> DensityRegularization:
    """Remove vertices until every row and column keeps more than delta/4 of the other side.

    One violating vertex is removed at a time, rows before columns, in
    ascending order.  A row-wise bound sums over any subset B, so the
    row/column scan certifies the block inequalities for every B.
    """
    A1, A2, E = _graph_parts(G)
    res = _step1(A1, A2, E, as_fraction(delta))
    if not isinstance(G.left, ExpSet):
        res.A1 = tuple(v[0] for v in res.A1)
        res.A2 = tuple(v[0] for v in res.A2)
        res.removed = [(s, v[0]) for s, v in res.removed]
    res.A1 = _rebuild(G.left, res.A1)
    res.A2 = _rebuild(G.right, res.A2)
    return res


# ---------------------------------------------------------------------------
# Fact 1


def fact1_extract(E: Iterable, F: Iterable, G, alpha) -> tuple:
    """F' = {z in F : |G n (E x {z})| > (alpha/2)|E|}, which has more than (alpha/2)|F| elements.

    ``G`` is a BipartiteGraph or an iterable of (left value, right value)
    pairs; E lives on the left, F on the right.
    """
    E = list(dict.fromkeys(E))
    F = list(dict.fromkeys(F))
    alpha = as_fraction(alpha)
    pairs = G.value_pairs() if isinstance(G, BipartiteGraph) else G
    Eset = set(E)
    deg = Counter(v for u, v in pairs if u in Eset)
    total = sum(deg[z] for z in F)
    if total * alpha.denominator <= alpha.numerator * len(E) * len(F):
        raise HypothesisFails(f"|G n (E x F)| = {total} is not above alpha |E||F|")
    keep = tuple(z for z in F if 2 * deg[z] * alpha.denominator > alpha.numerator * len(E))
    return tuple(sorted(keep))


# ---------------------------------------------------------------------------
# Step 2


@dataclass
class FiberProfile:
    n1: tuple[int, ...]
    n2: tuple[int, ...]
    N: int
    chosen: int
    bracket_ok: bool

    @property
    def t(self) -> int:
        return len(self.n1) - 1

    @property
    def target(self) -> float:
        return self.N ** 0.25


def _max_fibers(S: Sequence[Vector], t: int) -> tuple[int, ...]:
    return tuple(max(Counter(v[:k] for v in S).values()) if S else 0 for k in range(t + 1))


def choose_split(profile: FiberProfile, strict: bool = False) -> int:
    """Largest t' with n1(t') + n2(t') >= N^{1/4}; then the sum at t'+1 is below it."""
    ok = [k for k in range(profile.t + 1) if (profile.n1[k] + profile.n2[k]) ** 4 >= profile.N]
    if not ok:
        if strict:
            raise NoValidSplit("even t' = 0 fails n1 + n2 >= N^{1/4}")
        return 0
    return ok[-1]


def fiber_profile(A1, A2, N: int | None = None) -> FiberProfile:
    """Maximal fiber sizes n_i(t') over the first t' coordinates, t' = 0..t."""
    S1 = list(A1.elements) if isinstance(A1, ExpSet) else list(A1)
    S2 = list(A2.elements) if isinstance(A2, ExpSet) else list(A2)
    t = len(S1[0]) if S1 else len(S2[0])
    N = len(S1) * len(S2) if N is None else N
    n1, n2 = _max_fibers(S1, t), _max_fibers(S2, t)
    prof = FiberProfile(n1, n2, N, 0, True)
    ok = [k for k in range(t + 1) if (n1[k] + n2[k]) ** 4 >= N]
    prof.bracket_ok = bool(ok)
    prof.chosen = choose_split(prof)
    return prof


# ---------------------------------------------------------------------------
# Steps 3-4


def _dyadic_select(S: Sequence[Vector], t: int, weight) -> tuple[int, list[Vector], dict]:
    fibers = _fibers(S, t)
    mass: dict[int, float] = defaultdict(float)
    for prefix, members in fibers.items():
        j = len(members).bit_length() - 1
        mass[j] += sum(weight(v) for v in members)
    if not mass:
        raise EmptyAfterRegularization("no fibers to regularize")
    total = sum(mass.values())
    best = min(mass, key=lambda j: (-mass[j], j))
    m = 1 << best
    kept = [v for members in fibers.values() if m <= len(members) < 2 * m for v in members]
    info = {
        "m": m,
        "class_mass": {str(1 << j): mass[j] for j in sorted(mass)},
        "retained_mass": mass[best],
        "total_mass": total,
        "max_fiber": max(len(x) for x in fibers.values()),
    }
    return m, sorted(kept), info


def dyadic_fiber_regularize(S: ExpSet, t_split: int, weights=None):
    """Keep the fibers over the first t' coordinates whose sizes share one dyadic class [m, 2m).

    The class with the largest total weight wins (ties to the smaller m);
    weights default to 1 per element.  Returns (m, subset, info).
    """
    if weights is None:
        w = lambda v: 1.0  # noqa: E731
    elif callable(weights):
        w = weights
    else:
        table = dict(weights)
        w = lambda v: float(table.get(v, 0.0))  # noqa: E731
    m, kept, info = _dyadic_select(list(S.elements), t_split, w)
    return m, ExpSet(S.basis, tuple(kept)), info


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class InnerSummary:
    base_pair: tuple[Vector, Vector]
    ell1: int
    ell2: int
    delta3: float
    mbar1: int
    mbar2: int
    K10_size: int
    max_fiber_doubling: float
    identity: bool


@dataclass
class RegularizationReport:
    delta: Fraction
    K: float
    N1: int
    N2: int
    t_split: int
    swapped: bool
    profile: FiberProfile
    step1: DensityRegularization
    xbar: Vector
    A2pp: tuple
    m1: int
    m2: int
    M1: int
    M2: int
    A1bb: tuple
    A2bb: tuple
    delta1: Fraction
    L: Fraction
    delta0: Fraction
    K0: float
    G1: list
    G10: list
    fiber_graphs: dict
    Gtilde: set
    ledger: dict[str, LedgerEntry]
    dyadic: dict
    step7: list[InnerSummary] = field(default_factory=list)
    step7_ledger: dict[str, LedgerEntry] = field(default_factory=dict)
    inner_reports: dict = field(default_factory=dict)
    G_final: set = field(default_factory=set)
    checks: dict = field(default_factory=dict)

    @property
    def N1bb(self) -> int:
        return len(self.A1bb)

    @property
    def N2bb(self) -> int:
        return len(self.A2bb)

    @property
    def passed(self) -> bool:
        return (all(e.passed for e in self.ledger.values())
                and all(e.passed for e in self.step7_ledger.values())
                and all(self.checks.values()))

    def final_pairs(self) -> set:
        """G' as value pairs in the input orientation."""
        return {(v, u) for u, v in self.G_final} if self.swapped else set(self.G_final)

    def to_json(self) -> dict:
        ledger = {k: e.as_dict() for k, e in self.ledger.items()}
        ledger.update({k: e.as_dict() for k, e in self.step7_ledger.items()})
        return {
            "delta": float(self.delta),
            "K": self.K,
            "N1": self.N1,
            "N2": self.N2,
            "t_split": self.t_split,
            "swapped": self.swapped,
            "m1": self.m1,
            "m2": self.m2,
            "M1": self.M1,
            "M2": self.M2,
            "N1bb": self.N1bb,
            "N2bb": self.N2bb,
            "delta0": float(self.delta0),
            "delta1": float(self.delta1),
            "L": float(self.L),
            "K0": self.K0,
            "G10_size": len(self.G10),
            "Gtilde_size": len(self.Gtilde),
            "G_final_size": len(self.G_final),
            "step1_removed": len(self.step1.removed),
            "step7": [
                {"ell1": s.ell1, "ell2": s.ell2, "delta3": s.delta3, "mbar1": s.mbar1,
                 "mbar2": s.mbar2, "K10": s.K10_size, "identity": s.identity}
                for s in self.step7
            ],
            "checks": self.checks,
            "ledger": ledger,
        }


def _pipeline(A1, A2, E, delta: Fraction, K: float, split: int | None = None,
              refine: bool = True) -> RegularizationReport:
    N1, N2 = len(A1), len(A2)
    N = N1 * N2
    T = N ** 0.25
    d = float(delta)
    L_loss = lg(K / d)
    ledger: dict[str, LedgerEntry] = {}

    # Step 1
    s1 = _step1(A1, A2, E, delta)
    ledger.update(s1.audit)
    A1p, A2p = list(s1.A1), list(s1.A2)
    A1p_set, A2p_set = set(A1p), set(A2p)
    Ep = {(u, v) for u, v in E if u in A1p_set and v in A2p_set}

    # Step 2
    t = len(A1p[0])
    prof = fiber_profile(A1p, A2p, N)
    t_split = prof.chosen if split is None else min(split, t)
    prof.chosen = t_split
    swapped = prof.n2[t_split] > prof.n1[t_split]
    if swapped:
        A1p, A2p = A2p, A1p
        A1p_set, A2p_set = A2p_set, A1p_set
        Ep = {(v, u) for u, v in Ep}
        N1, N2 = N2, N1
        prof = FiberProfile(prof.n2, prof.n1, prof.N, t_split, prof.bracket_ok)
    n1t = prof.n1[t_split]
    N1p, N2p = len(A1p), len(A2p)
    ledger["3.14"] = exact(n1t, T / 2, "ge", "n1(t') >= N^{1/4}/2")

    # Step 3: regularize A2' against the heaviest A1' fiber
    fib1 = _fibers(A1p, t_split)
    xbar = min(fib1, key=lambda p: (-len(fib1[p]), p))
    Ebar = fib1[xbar]
    A2pp = list(fact1_extract(Ebar, A2p, Ep, delta / 4))
    ledger["3.16"] = exact(len(A2pp), d / 8 * N2p, "gt", "Fact 1 output size")
    thr2 = 1e-4 * d ** 5 * K ** -2 * n1t
    A2bar = [v for members in _fibers(A2pp, t_split).values() if len(members) > thr2 for v in members]
    A2bar_set = set(A2bar)
    ledger["3.20"] = exact(_edge_counts(Ep, None, A2bar_set), d / 10 * N1p * len(A2pp), "gt")
    deg2 = Counter(v for u, v in Ep)
    m2, A2bb, info2 = _dyadic_select(A2bar, t_split, lambda v: deg2[v])
    A2bb_set = set(A2bb)
    N2bb = len(A2bb)
    M2 = len(_fibers(A2bb, t_split))
    e_12bb = _edge_counts(Ep, None, A2bb_set)
    ledger["3.21"] = window(m2, thr2, n1t, hi_open=False, note="where m2 falls in its allowed window")
    ledger["3.23"] = lower_c(e_12bb, d / L_loss * N1p * len(A2pp))
    ledger["3.24"] = lower_c(N2bb, d ** 3 / L_loss * N2)
    ledger["3.24'"] = window(N2bb, M2 * m2, 2 * M2 * m2, lo_open=False, note="M2 m2 <= N2bb < 2 M2 m2")
    ledger["3.25"] = upper_c(M2, d ** -5 * K ** 2 * N2 / T)
    ledger["3.25.m2"] = lower_c(m2, d ** 5 * K ** -2 * T)

    # Step 4: regularize A1' weighted by edges into the regular A2
    thr1 = d ** 5 * K ** -3 * m2
    A1bar = [v for members in fib1.values() if len(members) > thr1 for v in members]
    deg1 = Counter(u for u, v in Ep if v in A2bb_set)
    m1, A1bb, info1 = _dyadic_select(A1bar, t_split, lambda v: deg1[v])
    A1bb_set = set(A1bb)
    N1bb = len(A1bb)
    M1 = len(_fibers(A1bb, t_split))
    Ebb = {(u, v) for u, v in Ep if u in A1bb_set and v in A2bb_set}
    ledger["3.30"] = window(m1, d ** 5 * K ** -3 * m2, d ** -5 * K ** 2 * m2,
                            note="where m1 falls in its allowed window")
    ledger["3.32"] = lower_c(len(Ebb), d / L_loss ** 2 * N1p * len(A2pp))
    ledger["3.33"] = lower_c(N1bb, d ** 2 / L_loss ** 2 * N1)
    ledger["3.34"] = lower_c(len(Ebb), d / L_loss ** 2 * N1bb * N2bb)
    ledger["3.35"] = upper_c(M1, d ** -10 * K ** 5 * N1 / T)
    ledger["3.35.m1"] = lower_c(m1, d ** 10 * K ** -5 * T)
    if not Ebb:
        raise EmptyAfterRegularization("no edges survive between the regular sets")

    # Step 5: regularize the graph over prefix pairs
    f1 = _fibers(A1bb, t_split)
    f2 = _fibers(A2bb, t_split)
    fg: dict[tuple, list] = defaultdict(list)
    for u, v in Ebb:
        fg[(u[:t_split], v[:t_split])].append((u[t_split:], v[t_split:]))
    fiber_graphs = {k: sorted(fg[k]) for k in sorted(fg)}
    G1 = list(fiber_graphs)
    stats = {}
    for key, edges in fiber_graphs.items():
        a, b = len(f1[key[0]]), len(f2[key[1]])
        s = len({_sum_vectors(x, y) for x, y in edges})
        stats[key] = (len(edges), a, b, s)
    # delta1: dyadic class of the fiber edge density
    by_density: dict[int, list] = defaultdict(list)
    for key, (e, a, b, s) in stats.items():
        by_density[floor_log2_ratio(e, a * b)].append(key)
    jd = min(by_density, key=lambda j: (-len(by_density[j]),
                                        -sum(stats[k][0] for k in by_density[j]), j))
    G1p = by_density[jd]
    delta1 = dyadic(jd)
    # drop pairs whose fiber doubling exceeds L0, then pick the dyadic sumset scale
    L0 = L_loss ** 4.5 * d ** -4.5 * K
    P = m1 * m2
    G1pp = [k for k in G1p if stats[k][3] < L0 * math.sqrt(P)]
    if not G1pp:
        raise EmptyAfterRegularization("every fiber graph exceeds the doubling cap")
    by_scale: dict[int, list] = defaultdict(list)
    for key in G1pp:
        by_scale[floor_log2_ratio(stats[key][3] ** 2, P) // 2].append(key)
    jl = min(by_scale, key=lambda j: (-len(by_scale[j]), -sum(stats[k][0] for k in by_scale[j]), j))
    G10 = sorted(by_scale[jl])
    Lval = dyadic(jl)
    delta0 = Fraction(len(G10), M1 * M2)
    base_sums = {_sum_vectors(x, y) for x, y in G10}
    K0 = len(base_sums) / math.sqrt(M1 * M2)
    Gtilde = {(p1 + y1, p2 + y2) for (p1, p2) in G10 for (y1, y2) in fiber_graphs[(p1, p2)]}
    mass_G1p = sum(stats[k][0] for k in G1p)
    ledger["3.38"] = lower_c(float(delta1), d / L_loss ** 2)
    ledger["3.40"] = lower_c(mass_G1p, d / L_loss ** 3 * N1bb * N2bb)
    ledger["3.44"] = lower_c(len(G10), len(G1pp) / L_loss, "|G10| against |G1''| / lg")
    ledger["3.45"] = lower_c(float(delta0), d / (float(delta1) * L_loss ** 4))
    ledger["3.47"] = upper_c(K0 * float(Lval), d ** -3 * lg(K) ** 2 * K)
    ledger["3.50"] = lower_c(len(Gtilde), d / L_loss ** 4 * N1bb * N2bb)
    ledger["3.51"] = lower_c(N1bb * N2bb, d ** 5 / L_loss ** 3 * N1 * N2)

    report = RegularizationReport(
        delta=delta, K=K, N1=len(A1), N2=len(A2), t_split=t_split, swapped=swapped,
        profile=prof, step1=s1, xbar=xbar, A2pp=tuple(A2pp), m1=m1, m2=m2, M1=M1, M2=M2,
        A1bb=tuple(A1bb), A2bb=tuple(A2bb), delta1=delta1, L=Lval, delta0=delta0, K0=K0,
        G1=G1, G10=G10, fiber_graphs=fiber_graphs, Gtilde=Gtilde, ledger=ledger,
        dyadic={"m2": info2, "m1": info1},
    )
    if refine:
        _step7(report, N)
    else:
        report.G_final = set(Gtilde)
    return report


def _step7(rep: RegularizationReport, N: int) -> None:
    """Split the next prime off inside every retained fiber graph and regularize again."""
    t = rep.t_split
    tail_len = len(rep.A1bb[0]) - t
    f1 = _fibers(rep.A1bb, t)
    f2 = _fibers(rep.A2bb, t)
    d1 = float(rep.delta1)
    Lf = float(rep.L)
    loss = lg(Lf / d1)
    worst: dict[str, LedgerEntry] = {}

    def keep(key, entry, lower=True):
        cur = worst.get(key)
        if cur is None or not entry.passed and cur.passed:
            worst[key] = entry
        elif entry.passed == cur.passed:
            if lower and entry.measured_ratio < cur.measured_ratio:
                worst[key] = entry
            if not lower and entry.measured_ratio > cur.measured_ratio:
                worst[key] = entry

    final: set = set()
    for key in rep.G10:
        p1, p2 = key
        edges = rep.fiber_graphs[key]
        if tail_len == 0 or (len(f1[p1]) == 1 and len(f2[p2]) == 1):
            # empty tail or single-point fibers: nothing left to refine
            rep.step7.append(InnerSummary(key, 1, 1, 1.0, 1, 1, 1, 1.0, True))
            final.update((p1 + y1, p2 + y2) for y1, y2 in edges)
            continue
        S1 = [v[t:] for v in f1[p1]]
        S2 = [v[t:] for v in f2[p2]]
        Eset = set(edges)
        Kin = _graph_doubling(Eset, len(S1), len(S2))
        inner = _pipeline(S1, S2, Eset, rep.delta1 / 4, Kin, split=1, refine=False)
        rep.inner_reports[key] = inner
        # sides of the inner report in the outer orientation
        if inner.swapped:
            ell1, ell2 = inner.m2, inner.m1
            mb1, mb2 = len(inner.A2bb), len(inner.A1bb)
            lifted = {(p1 + y1, p2 + y2) for y2, y1 in inner.Gtilde}
        else:
            ell1, ell2 = inner.m1, inner.m2
            mb1, mb2 = len(inner.A1bb), len(inner.A2bb)
            lifted = {(p1 + y1, p2 + y2) for y1, y2 in inner.Gtilde}
        final.update(lifted)
        fdoubling = max(_graph_doubling(set(inner.fiber_graphs[k]),
                                        len(_fibers(inner.A1bb, 1)[k[0]]),
                                        len(_fibers(inner.A2bb, 1)[k[1]]))
                        for k in inner.G10)
        d3 = float(inner.delta1)
        rep.step7.append(InnerSummary(key, ell1, ell2, d3, mb1, mb2, len(inner.G10), fdoubling, False))
        keep("3.62", lower_c(min(mb1 / rep.m1, mb2 / rep.m2), d1 ** 3 / loss ** 2,
                             "min over sides of mbar_i / m_i"))
        keep("3.62.upper", exact(max(mb1 / rep.m1, mb2 / rep.m2), 2, "lt", "mbar_i < 2 m_i"), lower=False)
        keep("3.63", exact(ell1 * ell2, math.sqrt(N), "lt", "l1 l2 < (N1 N2)^{1/2}"), lower=False)
        keep("3.63.min", exact(ell1 * ell2, min(rep.m1 * rep.m2, math.sqrt(N)), "le"), lower=False)
        for k in inner.G10:
            ke = len(inner.fiber_graphs[k])
            keep("3.64", window(ke, d3 * ell1 * ell2, 8 * d3 * ell1 * ell2, lo_open=False,
                                note="delta3 l1 l2 <= |K_z| < 8 delta3 l1 l2"))
        keep("3.65", lower_c(len(inner.G10), d1 / (d3 * loss ** 4) * mb1 * mb2 / (ell1 * ell2)))
        keep("3.66", upper_c(fdoubling, d1 ** -3 * lg(Lf) ** 2 * Lf), lower=False)
    rep.step7_ledger = worst
    rep.G_final = final


def regularize(G: BipartiteGraph, delta, split: int | None = None) -> RegularizationReport:
    """Run Steps 1-5 and the Step 7 refinement on G, with containment checks on the result."""
    if not isinstance(G.left, ExpSet):
        raise SumProductError("regularization works on exponent-vector graphs")
    A1, A2, E = _graph_parts(G)
    delta = as_fraction(delta)
    if not E:
        raise DensityTooLow("empty graph")
    K = _graph_doubling(E, len(A1), len(A2))
    rep = _pipeline(A1, A2, E, delta, K, split=split, refine=True)
    final = rep.final_pairs()
    tilde = {(v, u) for u, v in rep.Gtilde} if rep.swapped else rep.Gtilde
    rep.checks = {
        "G_final_subset_of_G": final <= E,
        "G_final_nonempty": bool(final),
        "Gtilde_subset_of_G": tilde <= E,
        "G_final_subset_of_Gtilde": final <= tilde,
    }
    return rep


def step5_graph_regularize(G: BipartiteGraph, delta, split: int | None = None) -> RegularizationReport:
    """Steps 1-5 without the Step 7 refinement."""
    A1, A2, E = _graph_parts(G)
    delta = as_fraction(delta)
    K = _graph_doubling(E, len(A1), len(A2))
    return _pipeline(A1, A2, E, delta, K, split=split, refine=False)


def step7_refine(report: RegularizationReport) -> RegularizationReport:
    """Apply the one-prime refinement to a Steps 1-5 report in place."""
    _step7(report, report.N1 * report.N2)
    return report


# ---------------------------------------------------------------------------
# BSG-style extraction


@dataclass
class BSGReport:
    size: int
    delta_prime: float
    K_prime: float
    edge_fraction: float
    seed: object
    popular: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def bsg_extract(A, G: BipartiteGraph, delta) -> tuple:
    """Popular-vertex, popular-path extraction of a structured piece of A.

    Vertices with at least (delta/2)|A| neighbours are popular.  For each
    popular seed x0 the candidate set is the popular y with at least
    (delta^2/2)|A| common neighbours with x0; the largest candidate set
    wins (ties to the smallest seed).  This is a heuristic: the report's
    measured delta', K' and edge fraction are the whole contract.
    """
    elems = list(A.elements) if isinstance(A, (ExpSet, IntSet)) else sorted(set(A))
    n = len(elems)
    idx = {v: i for i, v in enumerate(elems)}
    pairs = G.value_pairs()
    if len(pairs) <= float(delta) * n * n:
        raise DensityTooLow(f"|G| = {len(pairs)} is not above delta |A|^2")
    M = np.zeros((n, n), dtype=np.int64)
    for u, v in pairs:
        M[idx[u], idx[v]] = 1
    S = M | M.T
    deg = S.sum(axis=1)
    d = float(delta)
    popular = np.flatnonzero(deg >= d / 2 * n)
    codeg = S @ S
    best, best_set = None, np.array([], dtype=np.int64)
    for x0 in popular:
        cand = popular[codeg[x0, popular] >= d * d / 2 * n]
        if cand.size > best_set.size:
            best, best_set = int(x0), cand
    if best_set.size == 0:
        best_set = popular
    chosen = [elems[i] for i in best_set]
    sub = _rebuild(A, chosen) if isinstance(A, (ExpSet, IntSet)) else IntSet(tuple(chosen))
    diffs = difference_set(sub)
    inner = M[np.ix_(best_set, best_set)].sum() if best_set.size else 0
    report = BSGReport(
        size=len(chosen),
        delta_prime=len(chosen) / n,
        K_prime=len(diffs) / n,
        edge_fraction=float(inner) / (n * n),
        seed=elems[best] if best is not None else None,
        popular=int(popular.size),
    )
    return sub, report


# ---------------------------------------------------------------------------
# Freiman dimension and injective coordinates


def _vectors(S) -> list[tuple[int, ...]]:
    if isinstance(S, ExpSet):
        return list(S.elements)
    if isinstance(S, IntSet):
        return [(x,) for x in S.elements]
    return [tuple(v) if isinstance(v, (tuple, list)) else (int(v),) for v in S]


def _bareiss_rank(rows: list[list[int]]) -> int:
    """Rank of an integer matrix by fraction-free elimination."""
    M = [list(r) for r in rows]
    if not M:
        return 0
    nr, nc = len(M), len(M[0])
    rank, prev = 0, 1
    for c in range(nc):
        piv = next((r for r in range(rank, nr) if M[r][c] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for r in range(rank + 1, nr):
            for k in range(c + 1, nc):
                M[r][k] = (M[r][k] * M[rank][c] - M[rank][k] * M[r][c]) // prev
            M[r][c] = 0
        prev = M[rank][c]
        rank += 1
        if rank == nr:
            break
    return rank


def freiman_dimension(S) -> int:
    """Affine dimension: the rational rank of {x - x0 : x in S}."""
    vecs = _vectors(S)
    if not vecs:
        raise SumProductError("dimension of an empty set")
    x0 = vecs[0]
    rows = [[a - b for a, b in zip(v, x0)] for v in vecs[1:]]
    rows = [r for r in rows if any(r)]
    return _bareiss_rank(rows)


def _distinct(vecs, idx) -> int:
    return len({tuple(v[i] for i in idx) for v in vecs})


def select_injective_coords(S) -> tuple[int, ...]:
    """A small coordinate set I with the restriction to I one-to-one on S.

    Greedy growth by most distinct projections (ties to the lower index),
    then single deletions in ascending order while injectivity survives.
    Indices are 0-based.
    """
    vecs = _vectors(S)
    if len(set(vecs)) != len(vecs):
        raise SumProductError("elements must be distinct")
    t = len(vecs[0])
    n = len(vecs)
    chosen: list[int] = []
    while not chosen or _distinct(vecs, chosen) < n:
        rest = [i for i in range(t) if i not in chosen]
        best = max(rest, key=lambda i: (_distinct(vecs, sorted(chosen + [i])), -i))
        chosen = sorted(chosen + [best])
    for i in list(chosen):
        trial = [j for j in chosen if j != i]
        if trial and _distinct(vecs, trial) == n:
            chosen = trial
    return tuple(chosen)


@dataclass
class FreimanAudit:
    dim: int
    N: int
    sumset_size: int
    doubling: Fraction
    forms: dict
    holds: bool

    def as_dict(self) -> dict:
        return {
            "dim": self.dim,
            "N": self.N,
            "sumset_size": self.sumset_size,
            "doubling": float(self.doubling),
            "forms": self.forms,
            "holds": self.holds,
        }


def freiman_audit(S) -> FreimanAudit:
    """Dimension against doubling in several forms.

    The lemma itself: |S+S| >= (d+1)N - d(d+1)/2.  Since N >= d+1 this gives
    d <= 2 sigma - 2 with sigma = |S+S|/N.  The cruder d <= sigma - 1 can
    fail (the square {0,1}^2); both it and the ceiling form are recorded
    with margins but do not decide ``holds``.
    """
    vecs = _vectors(S)
    N = len(vecs)
    dim = freiman_dimension(vecs)
    sums = {_sum_vectors(a, b) for a in vecs for b in vecs}
    s = len(sums)
    sigma = Fraction(s, N)
    lemma_rhs = (dim + 1) * N - dim * (dim + 1) // 2
    forms = {
        "lemma": {"lhs": s, "rhs": lemma_rhs, "margin": s - lemma_rhs, "holds": s >= lemma_rhs},
        "relaxed": {"bound": float(2 * sigma - 2), "margin": float(2 * sigma - 2 - dim),
                    "holds": dim <= 2 * sigma - 2},
        "naive": {"bound": float(sigma - 1), "margin": float(sigma - 1 - dim), "holds": dim <= sigma - 1},
        "ceiling": {"bound": math.ceil(sigma) - 1, "margin": math.ceil(sigma) - 1 - dim,
                    "holds": dim <= math.ceil(sigma) - 1},
    }
    holds = forms["lemma"]["holds"] and forms["relaxed"]["holds"]
    return FreimanAudit(dim, N, s, sigma, forms, holds)
