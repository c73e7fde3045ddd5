"""Prime-exponent lattice: integers as exponent vectors over a finite prime basis.

Multiplication of positive integers becomes vector addition of exponent
vectors, so product sets of integers can be computed as sumsets in the
lattice without ever forming the (huge) integers themselves.

Coordinates are 0-based throughout: coordinate ``i`` is the exponent of
``basis.primes[i]``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import gmpy2
import numpy as np

from .errors import CofactorRemains, EmptyIndexSet, NonPositiveElement, SumProductError

ExponentVector = tuple[int, ...]

_SMALL_PRIMES = [p for p in range(2, 1000) if all(p % d for d in range(2, int(p**0.5) + 1))]


def is_prime(n: int) -> bool:
    return n >= 2 and bool(gmpy2.is_prime(n, 40))


def _pollard_brent(n: int, rng: random.Random) -> int:
    """Return a nontrivial factor of the composite ``n``."""
    if n % 2 == 0:
        return 2
    n_ = gmpy2.mpz(n)
    while True:
        y = gmpy2.mpz(rng.randrange(1, n))
        c = gmpy2.mpz(rng.randrange(1, n))
        m = 128
        g = r = q = gmpy2.mpz(1)
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n_
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n_
                    q = q * abs(x - y) % n_
                g = gmpy2.gcd(q, n_)
                k += m
            r *= 2
        if g == n_:
            g = gmpy2.mpz(1)
            while g == 1:
                ys = (ys * ys + c) % n_
                g = gmpy2.gcd(abs(x - ys), n_)
        if g != n_:
            return int(g)


def prime_factors(n: int) -> dict[int, int]:
    """Full factorization ``{p: e}`` of a positive integer (desk-scale sizes)."""
    if n < 1:
        raise NonPositiveElement(f"cannot factor {n}")
    out: dict[int, int] = {}
    for p in _SMALL_PRIMES:
        if p * p > n:
            break
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    stack = [n] if n > 1 else []
    rng = random.Random(0x5EED)
    while stack:
        m = stack.pop()
        if is_prime(m):
            out[m] = out.get(m, 0) + 1
            continue
        root = gmpy2.iroot(m, 2)
        if root[1]:
            stack.extend([int(root[0])] * 2)
            continue
        d = _pollard_brent(m, rng)
        stack.extend([d, m // d])
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class PrimeBasis:
    primes: tuple[int, ...]

    def __post_init__(self):
        primes = tuple(int(p) for p in self.primes)
        object.__setattr__(self, "primes", primes)
        if not primes:
            raise SumProductError("prime basis must be nonempty")
        if any(b <= a for a, b in zip(primes, primes[1:])):
            raise SumProductError(f"basis must be strictly increasing: {primes}")
        bad = [p for p in primes if not is_prime(p)]
        if bad:
            raise SumProductError(f"basis entries are not prime: {bad}")

    def __len__(self) -> int:
        return len(self.primes)

    def __iter__(self):
        return iter(self.primes)

    def index(self, p: int) -> int:
        return self.primes.index(p)

    def sub(self, indices: Sequence[int]) -> "PrimeBasis":
        return PrimeBasis(tuple(self.primes[i] for i in sorted(indices)))

    def union(self, other: "PrimeBasis") -> "PrimeBasis":
        return PrimeBasis(tuple(sorted(set(self.primes) | set(other.primes))))


def _as_basis(basis) -> PrimeBasis:
    return basis if isinstance(basis, PrimeBasis) else PrimeBasis(tuple(basis))


@dataclass(frozen=True)
class ExpSet:
    """A finite set of exponent vectors sharing one prime basis.

    Elements are stored deduplicated in lexicographic order, which is also
    the iteration order.
    """

    basis: PrimeBasis
    elements: tuple[ExponentVector, ...]

    def __post_init__(self):
        basis = _as_basis(self.basis)
        t = len(basis)
        elems = tuple(sorted({tuple(int(a) for a in v) for v in self.elements}))
        for v in elems:
            if len(v) != t:
                raise SumProductError(f"vector {v} has length {len(v)}, basis has {t} primes")
            if any(a < 0 for a in v):
                raise SumProductError(f"negative exponent in {v}")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "elements", elems)

    @property
    def N(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, v) -> bool:
        return tuple(v) in self._lookup

    @property
    def _lookup(self) -> frozenset:
        # cached lazily; the dataclass is frozen so bypass __setattr__
        try:
            return self.__dict__["_lookup_cache"]
        except KeyError:
            cache = frozenset(self.elements)
            self.__dict__["_lookup_cache"] = cache
            return cache

    def as_array(self) -> np.ndarray:
        return np.array(self.elements, dtype=np.int64).reshape(len(self.elements), len(self.basis))

    def reindex(self, basis: PrimeBasis) -> "ExpSet":
        """Re-express the set over a superset basis (new coordinates are zero)."""
        basis = _as_basis(basis)
        missing = set(self.basis.primes) - set(basis.primes)
        if missing:
            raise SumProductError(f"target basis lacks primes {sorted(missing)}")
        pos = [basis.index(p) for p in self.basis.primes]
        out = []
        for v in self.elements:
            w = [0] * len(basis)
            for i, a in zip(pos, v):
                w[i] = a
            out.append(tuple(w))
        return ExpSet(basis, tuple(out))

    def to_ints(self) -> list[int]:
        return sorted(evaluate(v, self.basis) for v in self.elements)

    def to_text(self) -> str:
        lines = ["basis " + " ".join(str(p) for p in self.basis.primes)]
        lines.extend(" ".join(str(a) for a in v) for v in self.elements)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExpSet":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("basis"):
            raise SumProductError("missing 'basis' header line")
        basis = PrimeBasis(tuple(int(p) for p in lines[0].split()[1:]))
        return cls(basis, tuple(tuple(int(a) for a in ln.split()) for ln in lines[1:]))


def align(*sets: ExpSet) -> list[ExpSet]:
    """Re-index several sets onto the union of their bases."""
    basis = sets[0].basis
    for s in sets[1:]:
        basis = basis.union(s.basis)
    return [s if s.basis == basis else s.reindex(basis) for s in sets]


def factorize(n: int, basis) -> ExponentVector:
    basis = _as_basis(basis)
    if n < 1:
        raise NonPositiveElement(f"{n} is not a positive integer")
    out = []
    for p in basis.primes:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        out.append(e)
    if n != 1:
        raise CofactorRemains(f"cofactor {n} has primes outside basis {basis.primes}")
    return tuple(out)


def evaluate(v: Sequence[int], basis) -> int:
    basis = _as_basis(basis)
    if len(v) != len(basis):
        raise SumProductError(f"vector length {len(v)} != basis size {len(basis)}")
    result = 1
    for p, a in zip(basis.primes, v):
        result *= p ** int(a)
    return result


def embed_set(A: Iterable[int]) -> tuple[PrimeBasis, ExpSet]:
    """Map a set of positive integers to its exponent vectors over the minimal basis.

    The set {1} has no prime factors; it is embedded over the basis [2] as
    the zero vector so that every ExpSet has a nonempty basis.
    """
    values = sorted({int(a) for a in A})
    if not values:
        raise SumProductError("cannot embed an empty set")
    if values[0] < 1:
        raise NonPositiveElement(f"{values[0]} is not a positive integer")
    facts = [prime_factors(n) for n in values]
    primes = sorted({p for f in facts for p in f}) or [2]
    basis = PrimeBasis(tuple(primes))
    vectors = tuple(tuple(f.get(p, 0) for p in primes) for f in facts)
    return basis, ExpSet(basis, vectors)


def project(S: ExpSet, indices: Iterable[int]) -> ExpSet:
    idx = sorted(set(int(i) for i in indices))
    if not idx:
        raise EmptyIndexSet("projection needs at least one coordinate")
    if idx[0] < 0 or idx[-1] >= len(S.basis):
        raise EmptyIndexSet(f"indices {idx} out of range for basis of size {len(S.basis)}")
    return ExpSet(S.basis.sub(idx), tuple(tuple(v[i] for i in idx) for v in S.elements))


def is_injective_on(S: ExpSet, indices: Iterable[int]) -> bool:
    idx = list(indices)
    return len({tuple(v[i] for i in idx) for v in S.elements}) == len(S)


def random_expset(basis, size: int, max_exponent: int, rng: np.random.Generator) -> ExpSet:
    """Uniform random subset of the box {0..max_exponent}^t of the given size."""
    basis = _as_basis(basis)
    t = len(basis)
    total = (max_exponent + 1) ** t
    if size > total:
        raise SumProductError(f"box has only {total} points, asked for {size}")
    codes = rng.choice(total, size=size, replace=False)
    radix = max_exponent + 1
    vecs = []
    for c in codes.tolist():
        v = []
        for _ in range(t):
            c, r = divmod(c, radix)
            v.append(r)
        vecs.append(tuple(reversed(v)))
    return ExpSet(basis, tuple(vecs))


def log_value(v: Sequence[int], basis) -> float:
    """Natural log of the integer a vector represents, without forming it."""
    basis = _as_basis(basis)
    return float(sum(a * math.log(p) for p, a in zip(basis.primes, v)))
