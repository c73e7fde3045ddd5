"""Sumset, product-set and energy kernels plus graph-restricted sumsets.

Two engines back every integer sumset:

* ``convolution``: affine-normalize the inputs (shift to 0, divide by the
  gcd of differences) and convolve indicator vectors.  Used when the
  normalized range is at most ``CONV_RANGE_LIMIT`` entries.
* ``hash``: chunked outer sums reduced with ``np.unique`` (or Python sets
  once values leave the int64 range).

Exponent-vector sets are packed into integers with a mixed radix large
enough that no coordinate ever carries, so they reuse the integer engines.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, TextIO, Union

import gmpy2
import numpy as np

from .errors import BudgetExceeded, NonPositiveElement, SumProductError
from .exponent_lattice import ExpSet, align, embed_set, evaluate

CONV_RANGE_LIMIT = 10**7
_INT64_SAFE = 2**62
_FFT_SAFE = 2**40
_CHUNK = 1 << 22


@dataclass(frozen=True)
class IntSet:
    elements: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(sorted({int(x) for x in self.elements})))

    @classmethod
    def of(cls, values: Iterable[int]) -> "IntSet":
        return cls(tuple(values))

    @property
    def N(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x) -> bool:
        return x in set(self.elements)

    def as_array(self) -> np.ndarray:
        return np.array(self.elements, dtype=np.int64)


SetLike = Union[IntSet, ExpSet]


def _as_intset(S) -> IntSet:
    return S if isinstance(S, IntSet) else IntSet(tuple(S))


# ---------------------------------------------------------------------------
# integer engines


def _fits_int64(values: Sequence[int], scale: int = 1) -> bool:
    if not len(values):
        return True
    return max(abs(int(values[0])), abs(int(values[-1]))) * scale < _INT64_SAFE


def _bool_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Support of the convolution of two 0/1 vectors, as 0/1 int8."""
    n = len(a) + len(b) - 1
    size = 1 << (n - 1).bit_length()
    fa = np.fft.rfft(a.astype(np.float64), size)
    fb = np.fft.rfft(b.astype(np.float64), size)
    out = np.fft.irfft(fa * fb, size)[:n]
    return (out > 0.5).astype(np.int8)


def _normalize(arrays: Sequence[Sequence[int]]) -> tuple[list[int], int]:
    """Common gcd of differences within each array (shift is per array)."""
    g = 0
    for arr in arrays:
        base = int(arr[0])
        for x in arr:
            g = math.gcd(g, int(x) - base)
    return [int(arr[0]) for arr in arrays], (g or 1)


def _outer_unique(cur: np.ndarray, step: np.ndarray, budget: int | None) -> np.ndarray:
    parts = []
    rows = max(1, _CHUNK // max(1, len(step)))
    total = 0
    for i in range(0, len(cur), rows):
        part = np.unique((cur[i:i + rows, None] + step[None, :]).ravel())
        parts.append(part)
        total += len(part)
        if len(parts) > 8:
            parts = [np.unique(np.concatenate(parts))]
            total = len(parts[0])
        if budget is not None and total > 4 * budget:
            parts = [np.unique(np.concatenate(parts))]
            total = len(parts[0])
            if total > budget:
                raise BudgetExceeded(f"sumset exceeds budget {budget}", partial=total)
    return np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)


def _sum_ints(a: Sequence[int], b: Sequence[int], engine: str = "auto",
              budget: int | None = None) -> list[int]:
    """Sorted sumset a+b of two sorted integer sequences."""
    if not len(a) or not len(b):
        return []
    (a0, b0), g = _normalize([a, b])
    span = (int(a[-1]) - a0) // g + (int(b[-1]) - b0) // g + 1
    if engine == "auto":
        # dense enough that an FFT over the span beats enumerating pairs
        dense = span <= 16 * len(a) * len(b)
        engine = "convolution" if span <= CONV_RANGE_LIMIT and dense else "hash"
    if engine == "convolution":
        ia = np.zeros((int(a[-1]) - a0) // g + 1, dtype=np.int8)
        ia[[(int(x) - a0) // g for x in a]] = 1
        ib = np.zeros((int(b[-1]) - b0) // g + 1, dtype=np.int8)
        ib[[(int(x) - b0) // g for x in b]] = 1
        idx = np.flatnonzero(_bool_convolve(ia, ib))
        if budget is not None and len(idx) > budget:
            raise BudgetExceeded(f"sumset exceeds budget {budget}", partial=len(idx))
        return [a0 + b0 + g * int(i) for i in idx]
    if _fits_int64(a, 2) and _fits_int64(b, 2):
        out = _outer_unique(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64), budget)
        return [int(x) for x in out]
    out = set()
    for x in a:
        out.update(x + y for y in b)
        if budget is not None and len(out) > budget:
            raise BudgetExceeded(f"sumset exceeds budget {budget}", partial=len(out))
    return sorted(out)


def _iterated_ints(a: Sequence[int], k: int, engine: str = "auto",
                   budget: int | None = None) -> list[int]:
    if k < 1:
        raise SumProductError("k must be >= 1")
    a = sorted({int(x) for x in a})
    if not a or k == 1:
        return a
    (a0,), g = _normalize([a])
    d = (a[-1] - a0) // g
    if engine == "auto":
        span = k * d + 1
        dense = span <= 16 * len(a) * min(math.comb(len(a) + k - 1, k), span)
        engine = "convolution" if span <= CONV_RANGE_LIMIT and dense else "hash"
    if engine == "convolution":
        ind = np.zeros(d + 1, dtype=np.int8)
        ind[[(x - a0) // g for x in a]] = 1
        cur = ind
        for _ in range(k - 1):
            cur = _bool_convolve(cur, ind)
            if budget is not None and int(cur.sum()) > budget:
                raise BudgetExceeded(f"{k}-fold sumset exceeds budget {budget}", partial=int(cur.sum()))
        return [k * a0 + g * int(i) for i in np.flatnonzero(cur)]
    cur = a
    for _ in range(k - 1):
        cur = _sum_ints(cur, a, engine="hash", budget=budget)
    return cur


# ---------------------------------------------------------------------------
# exponent-vector packing


def _radices(maxima: Sequence[int]) -> tuple[list[int], int]:
    weights = []
    w = 1
    for m in reversed(maxima):
        weights.append(w)
        w *= m + 1
    return list(reversed(weights)), w


def _pack(vectors: Iterable[Sequence[int]], weights: Sequence[int]) -> list[int]:
    return sorted(sum(a * w for a, w in zip(v, weights)) for v in vectors)


def _unpack(codes: Iterable[int], weights: Sequence[int]) -> list[tuple[int, ...]]:
    out = []
    for c in codes:
        v = []
        for w in weights:
            q, c = divmod(c, w)
            v.append(q)
        out.append(tuple(v))
    return out


def _coord_max(S: ExpSet) -> list[int]:
    t = len(S.basis)
    if not S.elements:
        return [0] * t
    return [max(v[i] for v in S.elements) for i in range(t)]


# ---------------------------------------------------------------------------
# public operations


def iterated_sumset(S: SetLike, k: int, engine: str = "auto", budget: int | None = None) -> SetLike:
    """k-fold sumset {x1+...+xk : xi in S}; vector addition for ExpSet."""
    if k < 1:
        raise SumProductError("k must be >= 1")
    if isinstance(S, ExpSet):
        if k == 1 or not S.elements:
            return S
        maxima = [k * m for m in _coord_max(S)]
        weights, _ = _radices(maxima)
        codes = _iterated_ints(_pack(S.elements, weights), k, engine=engine, budget=budget)
        return ExpSet(S.basis, tuple(_unpack(codes, weights)))
    S = _as_intset(S)
    return IntSet(tuple(_iterated_ints(S.elements, k, engine=engine, budget=budget)))


def sumset(S: SetLike, T: SetLike, engine: str = "auto") -> SetLike:
    if isinstance(S, ExpSet) or isinstance(T, ExpSet):
        S, T = align(S, T)
        maxima = [a + b for a, b in zip(_coord_max(S), _coord_max(T))]
        weights, _ = _radices(maxima)
        codes = _sum_ints(_pack(S.elements, weights), _pack(T.elements, weights), engine=engine)
        return ExpSet(S.basis, tuple(_unpack(codes, weights)))
    return IntSet(tuple(_sum_ints(_as_intset(S).elements, _as_intset(T).elements, engine=engine)))


def _check_positive(A: Iterable[int]) -> list[int]:
    vals = sorted({int(a) for a in A})
    if vals and vals[0] < 1:
        raise NonPositiveElement(f"product sets need positive integers, got {vals[0]}")
    return vals


def product_set_exp(A: Iterable[int], k: int, budget: int | None = None) -> ExpSet:
    """A^(k) kept in exponent space (as k-fold sumset of the embedded set)."""
    vals = _check_positive(A)
    _, S = embed_set(vals)
    return iterated_sumset(S, k, budget=budget)


def product_set(A: Iterable[int], k: int, budget: int | None = None) -> IntSet:
    """{a1*...*ak : ai in A}, computed in exponent space and evaluated back."""
    S = product_set_exp(A, k, budget=budget)
    return IntSet(tuple(evaluate(v, S.basis) for v in S.elements))


def difference_set(S: SetLike):
    """S - S.  IntSet for integers; sorted tuple of (signed) vectors for ExpSet."""
    if isinstance(S, ExpSet):
        maxima = _coord_max(S)
        shifted = [2 * m for m in maxima]
        weights, _ = _radices(shifted)
        plus = _pack(S.elements, weights)
        minus = _pack((tuple(m - a for a, m in zip(v, maxima)) for v in S.elements), weights)
        codes = _sum_ints(plus, minus)
        return tuple(tuple(a - m for a, m in zip(v, maxima)) for v in _unpack(codes, weights))
    vals = _as_intset(S).elements
    return IntSet(tuple(_sum_ints(vals, sorted(-x for x in vals))))


def quotient_set(A: Iterable[int]) -> tuple[Fraction, ...]:
    """A/A as exact fractions, obtained through the exponent differences."""
    vals = _check_positive(A)
    basis, S = embed_set(vals)
    out = []
    for d in difference_set(S):
        num = evaluate(tuple(max(x, 0) for x in d), basis)
        den = evaluate(tuple(max(-x, 0) for x in d), basis)
        out.append(Fraction(num, den))
    return tuple(sorted(out))


# ---------------------------------------------------------------------------
# representation functions and energies


def _kronecker_convolve(a: Sequence[int], b: Sequence[int]) -> list[int]:
    """Exact integer convolution of non-negative sequences by Kronecker packing."""
    bound = max(a) * max(b) * min(len(a), len(b))
    width = max(64, ((int(bound).bit_length() + 1 + 63) // 64) * 64)
    nbytes = width // 8

    def pack(seq):
        buf = b"".join(int(x).to_bytes(nbytes, "little") for x in seq)
        return gmpy2.mpz(int.from_bytes(buf, "little"))

    prod = int(pack(a) * pack(b))
    n = len(a) + len(b) - 1
    raw = prod.to_bytes(n * nbytes, "little")
    return [int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") for i in range(n)]


def exact_convolve(a, b) -> list[int]:
    """Exact convolution of non-negative integer vectors.

    Float FFT with rounding is used while the total mass keeps rounding error
    far below 1/2; larger inputs go through big-integer packing.
    """
    a_arr = np.asarray(a, dtype=object)
    b_arr = np.asarray(b, dtype=object)
    if not len(a_arr) or not len(b_arr):
        return []
    sa, sb = int(sum(a_arr)), int(sum(b_arr))
    if sa * sb < _FFT_SAFE:
        fa = np.asarray(a_arr, dtype=np.float64)
        fb = np.asarray(b_arr, dtype=np.float64)
        n = len(fa) + len(fb) - 1
        size = 1 << (n - 1).bit_length()
        out = np.fft.irfft(np.fft.rfft(fa, size) * np.fft.rfft(fb, size), size)[:n]
        return [int(x) for x in np.rint(out).astype(np.int64)]
    return _kronecker_convolve([int(x) for x in a_arr], [int(x) for x in b_arr])


def _counts_hash(vals: Sequence[int], h: int) -> dict[int, int]:
    n = len(vals)
    if n**h < 2**62 and _fits_int64(vals, h):
        keys = np.zeros(1, dtype=np.int64)
        cnts = np.ones(1, dtype=np.int64)
        arr = np.asarray(vals, dtype=np.int64)
        for _ in range(h):
            if len(keys) * n > 5 * 10**7:
                break
            sums = np.add.outer(keys, arr).ravel()
            keys, inv = np.unique(sums, return_inverse=True)
            nxt = np.zeros(len(keys), dtype=np.int64)
            np.add.at(nxt, inv.ravel(), np.repeat(cnts, n))
            cnts = nxt
            h -= 1
        counts = {int(k): int(c) for k, c in zip(keys, cnts)}
    else:
        counts = {0: 1}
    for _ in range(h):
        nxt: Counter = Counter()
        for n, c in counts.items():
            for a in vals:
                nxt[n + a] += c
        counts = dict(nxt)
    return counts


def _counts_convolution(vals: Sequence[int], h: int) -> dict[int, int]:
    (a0,), g = _normalize([vals])
    ind = [0] * ((vals[-1] - a0) // g + 1)
    for x in vals:
        ind[(x - a0) // g] = 1
    cur = ind
    for _ in range(h - 1):
        cur = exact_convolve(cur, ind)
    return {h * a0 + g * i: c for i, c in enumerate(cur) if c}


def representation_counts(A: Iterable[int], h: int, engine: str = "auto") -> dict[int, int]:
    """r_h(n; A): number of ordered h-tuples from A summing to n, for n in hA."""
    if h < 1:
        raise SumProductError("h must be >= 1")
    vals = list(_as_intset(A).elements)
    if not vals:
        return {}
    if engine == "auto":
        (a0,), g = _normalize([vals])
        span = h * ((vals[-1] - a0) // g) + 1
        engine = "convolution" if span <= CONV_RANGE_LIMIT and span <= 64 * len(vals) ** 2 else "hash"
    if engine == "convolution":
        counts = _counts_convolution(vals, h)
    elif engine == "hash":
        counts = _counts_hash(vals, h)
    else:
        raise SumProductError(f"unknown engine {engine!r}")
    return dict(sorted(counts.items()))


def additive_energy(A: Iterable[int], h: int = 2, engine: str = "auto") -> int:
    """E_h(A) = sum_n r_h(n; A)^2."""
    return sum(c * c for c in representation_counts(A, h, engine=engine).values())


@dataclass(frozen=True)
class EnergyBound:
    lower: Fraction
    sumset_size: int
    holds: bool


def energy_sumset_bound(A: Iterable[int], h: int) -> EnergyBound:
    """Cauchy-Schwarz: |hA| >= N^{2h} / E_h(A), both sides exact."""
    S = _as_intset(A)
    counts = representation_counts(S, h)
    energy = sum(c * c for c in counts.values())
    lower = Fraction(S.N ** (2 * h), energy)
    return EnergyBound(lower, len(counts), len(counts) >= lower)


@dataclass(frozen=True)
class RuzsaReport:
    N: int
    sumset_size: int
    difference_size: int
    K: Fraction
    bound: Fraction
    holds: bool

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "sumset_size": self.sumset_size,
            "difference_size": self.difference_size,
            "K": float(self.K),
            "bound": float(self.bound),
            "holds": self.holds,
        }


def ruzsa_audit(A: Iterable[int]) -> RuzsaReport:
    """Check |A/A| = |E - E| <= K^2 |E| for the embedded set E, K = |E+E|/|E|."""
    vals = _check_positive(A)
    _, S = embed_set(vals)
    n = len(S)
    plus = len(iterated_sumset(S, 2))
    minus = len(difference_set(S))
    K = Fraction(plus, n)
    bound = K * K * n
    return RuzsaReport(n, plus, minus, K, bound, minus <= bound)


# ---------------------------------------------------------------------------
# bipartite graphs


@dataclass(frozen=True)
class BipartiteGraph:
    """Edge set over left x right, stored as index pairs.

    ``left`` and ``right`` are IntSet or ExpSet (ExpSets are aligned to a
    common basis).  Row and column adjacency are built on demand.
    """

    left: SetLike
    right: SetLike
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        left, right = self.left, self.right
        if isinstance(left, ExpSet) and isinstance(right, ExpSet) and left.basis != right.basis:
            left, right = align(left, right)
        if not isinstance(left, ExpSet):
            left = _as_intset(left)
        if not isinstance(right, ExpSet):
            right = _as_intset(right)
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        n1, n2 = len(left), len(right)
        for i, j in edges:
            if not (0 <= i < n1 and 0 <= j < n2):
                raise SumProductError(f"edge {(i, j)} out of range for {n1}x{n2}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def full(cls, left: SetLike, right: SetLike) -> "BipartiteGraph":
        return cls(left, right, frozenset((i, j) for i in range(len(left)) for j in range(len(right))))

    @classmethod
    def from_value_pairs(cls, left: SetLike, right: SetLike, pairs) -> "BipartiteGraph":
        li = {v: i for i, v in enumerate(left)}
        ri = {v: j for j, v in enumerate(right)}
        return cls(left, right, frozenset((li[x], ri[y]) for x, y in pairs))

    @property
    def N1(self) -> int:
        return len(self.left)

    @property
    def N2(self) -> int:
        return len(self.right)

    def __len__(self) -> int:
        return len(self.edges)

    def density(self) -> Fraction:
        if not self.N1 or not self.N2:
            return Fraction(0)
        return Fraction(len(self.edges), self.N1 * self.N2)

    def _adjacency(self):
        try:
            return self.__dict__["_adj"]
        except KeyError:
            rows: dict[int, set] = {}
            cols: dict[int, set] = {}
            for i, j in self.edges:
                rows.setdefault(i, set()).add(j)
                cols.setdefault(j, set()).add(i)
            self.__dict__["_adj"] = (rows, cols)
            return rows, cols

    def row(self, i: int) -> frozenset:
        return frozenset(self._adjacency()[0].get(i, ()))

    def col(self, j: int) -> frozenset:
        return frozenset(self._adjacency()[1].get(j, ()))

    def value_pairs(self):
        L, R = self.left.elements, self.right.elements
        return sorted((L[i], R[j]) for i, j in self.edges)

    def fiber(self, x) -> set:
        """G(x) = {x' : (x, x') in G or (x', x) in G}, by element value."""
        out = set()
        L, R = self.left.elements, self.right.elements
        key = tuple(x) if isinstance(self.left, ExpSet) else int(x)
        if key in set(L):
            out.update(R[j] for j in self.row(L.index(key)))
        if key in set(R):
            out.update(L[i] for i in self.col(R.index(key)))
        return out

    def subgraph(self, edges: Iterable[tuple[int, int]]) -> "BipartiteGraph":
        edges = frozenset(edges)
        if not edges <= self.edges:
            raise SumProductError("subgraph edges must be a subset of the graph")
        return BipartiteGraph(self.left, self.right, edges)

    def transpose(self) -> "BipartiteGraph":
        return BipartiteGraph(self.right, self.left, frozenset((j, i) for i, j in self.edges))

    def symmetrize(self) -> "BipartiteGraph":
        """Merge both sides into A = A1 u A2 and close the edges under swap."""
        if isinstance(self.left, ExpSet):
            merged = ExpSet(self.left.basis, self.left.elements + self.right.elements)
        else:
            merged = IntSet(self.left.elements + self.right.elements)
        pairs = self.value_pairs()
        sym = set(pairs) | {(y, x) for x, y in pairs}
        return BipartiteGraph.from_value_pairs(merged, merged, sym)


def graph_sumset(G: BipartiteGraph) -> SetLike:
    """A1 +_G A2 = {x1 + x2 : (x1, x2) in G}."""
    L, R = G.left.elements, G.right.elements
    if isinstance(G.left, ExpSet):
        sums = {tuple(a + b for a, b in zip(L[i], R[j])) for i, j in G.edges}
        return ExpSet(G.left.basis, tuple(sums))
    return IntSet(tuple(L[i] + R[j] for i, j in G.edges))


def doubling_constant(G: BipartiteGraph) -> float:
    """K(G) = |A1 +_G A2| / sqrt(N1 N2)."""
    if not G.N1 or not G.N2:
        raise SumProductError("doubling constant needs nonempty sides")
    return len(graph_sumset(G)) / math.sqrt(G.N1 * G.N2)


def random_graph(left: SetLike, right: SetLike, p: float, rng: np.random.Generator) -> BipartiteGraph:
    mask = rng.random((len(left), len(right))) < p
    return BipartiteGraph(left, right, frozenset(zip(*map(lambda a: a.tolist(), np.nonzero(mask)))))


# ---------------------------------------------------------------------------
# CSV emission


def write_counts_csv(counts: dict[int, int], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "count"])
    for n, c in sorted(counts.items()):
        w.writerow([n, c])


def write_growth_csv(rows: Iterable[tuple[int, int, int]], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "sumset_size", "productset_size"])
    for k, s, p in rows:
        w.writerow([k, s, p])
