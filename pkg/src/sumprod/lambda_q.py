"""Lambda(q) constants of finite integer sets.

lambda_q(A) is the largest L^q(T) norm of a trigonometric polynomial with
spectrum in A and unit l2 coefficient norm.  Only one-sided bounds are
produced: a certified lower bound (a concrete coefficient vector whose
norm is evaluated by exact quadrature for even q) and the trivial upper
bound sqrt(N).

Norms are computed on the equispaced grid theta_j = j/M with an FFT.  For
q = 2h and M > h * span(A) the grid average of |F|^q equals the integral
exactly, because |F|^{2h} is a trigonometric polynomial of degree
h * span(A).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from .errors import CoprimalityViolated, GridTooCoarse, SumProductError
from .setops import IntSet, additive_energy

ADAPTIVE_RTOL = 1e-8
MAX_ADAPTIVE_M = 1 << 24


def _even_half(q: float) -> int | None:
    """h if q == 2h for an integer h >= 1, else None."""
    if float(q).is_integer() and int(q) % 2 == 0 and q >= 2:
        return int(q) // 2
    return None


@dataclass(frozen=True)
class TorusGrid:
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise SumProductError("grid needs M >= 1")

    def is_exact(self, span: int, q: float) -> bool:
        h = _even_half(q)
        return h is not None and self.M > h * span

    @classmethod
    def default(cls, span: int, q: float) -> "TorusGrid":
        """Twice the exactness threshold, rounded up to a power of two for the FFT."""
        h = _even_half(q)
        m = 4 * (h if h else math.ceil(q / 2)) * max(span, 0) + 1
        return cls(1 << (m - 1).bit_length() if m > 1 else 1)


@dataclass
class CoefficientVector:
    set: IntSet
    coefficients: np.ndarray

    def __post_init__(self):
        self.set = self.set if isinstance(self.set, IntSet) else IntSet.of(self.set)
        self.coefficients = np.asarray(self.coefficients, dtype=np.complex128).reshape(-1)
        if len(self.coefficients) != len(self.set):
            raise SumProductError("one coefficient per element of the set is required")
        if float(np.vdot(self.coefficients, self.coefficients).real) > 1 + 1e-12:
            raise SumProductError("coefficient vector must have l2 norm <= 1")

    @classmethod
    def uniform(cls, A) -> "CoefficientVector":
        A = A if isinstance(A, IntSet) else IntSet.of(A)
        return cls(A, np.full(len(A), 1 / math.sqrt(len(A)), dtype=np.complex128))

    @classmethod
    def delta(cls, A, n: int) -> "CoefficientVector":
        A = A if isinstance(A, IntSet) else IntSet.of(A)
        c = np.zeros(len(A), dtype=np.complex128)
        c[A.elements.index(n)] = 1
        return cls(A, c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))


def _grid_values(freqs: np.ndarray, coeffs: np.ndarray, M: int) -> np.ndarray:
    """F(j/M) for j < M, with F(theta) = sum c_n e^{2 pi i n theta}."""
    buf = np.zeros(M, dtype=np.complex128)
    if len(freqs) and int(freqs.max()) - int(freqs.min()) < M:
        buf[np.mod(freqs, M)] = coeffs
    else:
        np.add.at(buf, np.mod(freqs, M), coeffs)
    return np.fft.ifft(buf) * M


def _grid_moment(freqs, coeffs, q: float, M: int) -> float:
    vals = np.abs(_grid_values(freqs, coeffs, M))
    return float(np.mean(vals ** q))


def lq_norm(freqs: Sequence[int], coeffs: Sequence[complex], q: float, M: int | None = None) -> float:
    """L^q(T) norm of sum c_n e(n theta) for arbitrary (unnormalized) coefficients.

    Even q uses the exact grid (or the supplied M); other q double the grid
    until the value moves by less than 1e-8 relative.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if not len(freqs):
        return 0.0
    freqs = freqs - freqs.min()
    span = int(freqs.max())
    if M is not None:
        return _grid_moment(freqs, coeffs, q, M) ** (1 / q)
    h = _even_half(q)
    if h is not None:
        return _grid_moment(freqs, coeffs, q, h * span + 1) ** (1 / q)
    M = TorusGrid.default(span, q).M
    prev = _grid_moment(freqs, coeffs, q, M) ** (1 / q)
    while M < MAX_ADAPTIVE_M:
        M *= 2
        cur = _grid_moment(freqs, coeffs, q, M) ** (1 / q)
        if abs(cur - prev) <= ADAPTIVE_RTOL * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return prev


def trig_norm(A, c: CoefficientVector, q: float, grid: TorusGrid | None = None,
              exact: bool = False) -> float:
    """Grid L^q norm of the polynomial with spectrum A and coefficients c.

    Frequencies are shifted by -min(A) first; the modulus of F on the grid
    is unchanged by that shift.  With ``exact=True`` the grid must satisfy
    the quadrature-exactness condition, otherwise GridTooCoarse is raised.
    """
    A = A if isinstance(A, IntSet) else IntSet.of(A)
    if q < 2:
        raise SumProductError("q must be >= 2")
    if tuple(c.set.elements) != tuple(A.elements):
        raise SumProductError("coefficient vector is indexed by a different set")
    freqs = A.as_array() - A.elements[0]
    span = int(freqs.max())
    if grid is None:
        grid = TorusGrid.default(span, q)
    if exact and not grid.is_exact(span, q):
        raise GridTooCoarse(f"M={grid.M} is not exact for q={q}, span={span}")
    return _grid_moment(freqs, c.coefficients, q, grid.M) ** (1 / q)


@dataclass
class LambdaEstimate:
    set: IntSet
    q: float
    lower: float
    certificate: CoefficientVector
    upper: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "set": list(self.set.elements),
            "q": self.q,
            "lower": self.lower,
            "upper": self.upper,
            "M": self.diagnostics.get("M"),
            "restarts": self.diagnostics.get("restarts"),
            "seed": self.diagnostics.get("seed"),
            "certificate": [[float(z.real), float(z.imag)] for z in self.certificate.coefficients],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _reduced_frequencies(A: IntSet) -> np.ndarray:
    f = A.as_array() - A.elements[0]
    g = reduce(math.gcd, (int(x) for x in f), 0) or 1
    return f // g


def _ascend(freqs: np.ndarray, c0: np.ndarray, q: float, M: int, max_iters: int, tol: float):
    """Projected gradient ascent of mean|F|^q on the complex unit sphere.

    Backtracking only accepts steps that do not decrease the objective, so
    the recorded history is non-decreasing.
    """
    idx = np.mod(freqs, M)

    def objective(c):
        vals = _grid_values(freqs, c, M)
        return float(np.mean(np.abs(vals) ** q)), vals

    c = c0 / np.linalg.norm(c0)
    f, vals = objective(c)
    history = [f]
    eta = None
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        mod = np.abs(vals)
        w = np.where(mod > 0, mod ** (q - 2), 0.0) * vals if q != 2 else vals
        g = (q / 2) * np.fft.fft(w)[idx] / M
        g_t = g - np.real(np.vdot(c, g)) * c
        gnorm = float(np.linalg.norm(g_t))
        if gnorm <= 1e-12 * max(q * f, 1e-300):
            converged = True
            break
        # 2/(q f) is the step whose normalization equals the power step
        # c <- g/|g|, which never decreases a convex objective
        power = 2.0 / (q * f)
        eta = power if eta is None else max(2 * eta, power)
        accepted = False
        for _ in range(60):
            trial = c + eta * g_t
            trial /= np.linalg.norm(trial)
            f_new, vals_new = objective(trial)
            if f_new >= f:
                accepted = True
                break
            eta /= 2
        if not accepted:
            converged = True
            break
        gain = f_new - f
        c, f, vals = trial, f_new, vals_new
        history.append(f)
        if gain <= tol * f:
            converged = True
            break
    return c, f, history, it, converged


def lambda_lower_bound(A, q: float, restarts: int = 32, max_iters: int = 500, seed: int = 0,
                       tol: float = 1e-10, workers: int = 1) -> LambdaEstimate:
    """Multistart projected-gradient lower bound for lambda_q(A).

    Restart 0 starts from the uniform vector; restart r >= 1 from uniform
    magnitudes with phases drawn from default_rng([seed, r]).  Frequencies
    are shifted and divided by their gcd, which leaves every L^q norm
    unchanged, so A and t*A give identical results.
    """
    A = A if isinstance(A, IntSet) else IntSet.of(A)
    if q < 2:
        raise SumProductError("q must be >= 2")
    if not len(A):
        raise SumProductError("empty set")
    N = len(A)
    freqs = _reduced_frequencies(A)
    span = int(freqs.max())
    h = _even_half(q)
    M = TorusGrid.default(span, q).M
    if h is None:
        M = _adaptive_grid(freqs, q, M)

    def run(r: int):
        if r == 0:
            c0 = np.full(N, 1 / math.sqrt(N), dtype=np.complex128)
        else:
            rng = np.random.default_rng([seed, r])
            c0 = np.exp(2j * np.pi * rng.random(N)) / math.sqrt(N)
        return _ascend(freqs, c0, q, M, max_iters, tol)

    # at q = 2 the objective is ||c||_2 on the whole sphere, so one start suffices
    n_runs = 1 if q == 2 else max(1, restarts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(n_runs)))
    else:
        results = [run(r) for r in range(n_runs)]

    best = max(range(n_runs), key=lambda r: (results[r][1], -r))
    c_best = results[best][0]
    lower = lq_norm(freqs, c_best, q, M)
    cert = CoefficientVector(A, c_best / max(1.0, float(np.linalg.norm(c_best))))
    diagnostics = {
        "M": M,
        "restarts": n_runs,
        "seed": seed,
        "requested_restarts": restarts,
        "best_restart": best,
        "iterations": [res[3] for res in results],
        "converged": [res[4] for res in results],
        "histories_monotone": all(
            all(b >= a for a, b in zip(res[2], res[2][1:])) for res in results
        ),
    }
    return LambdaEstimate(A, q, lower, cert, upper=lambda_trivial_upper(A, q), diagnostics=diagnostics)


def _adaptive_grid(freqs: np.ndarray, q: float, M: int) -> int:
    c = np.full(len(freqs), 1 / math.sqrt(len(freqs)), dtype=np.complex128)
    prev = _grid_moment(freqs, c, q, M) ** (1 / q)
    while M < MAX_ADAPTIVE_M:
        cur = _grid_moment(freqs, c, q, 2 * M) ** (1 / q)
        M *= 2
        if abs(cur - prev) <= ADAPTIVE_RTOL * cur:
            break
        prev = cur
    return M


def lambda_uniform_even(A, h: int) -> float:
    """Exact L^{2h} norm of the uniform-coefficient polynomial: (E_h / N^h)^{1/(2h)}."""
    A = A if isinstance(A, IntSet) else IntSet.of(A)
    if h < 1:
        raise SumProductError("h must be >= 1")
    energy = additive_energy(A, h)
    return (energy / len(A) ** h) ** (1 / (2 * h))


def lambda_trivial_upper(A, q: float | None = None) -> float:
    """sqrt(N): the triangle inequality plus Cauchy-Schwarz over N frequencies."""
    return math.sqrt(len(A))


@dataclass
class Prop1Report:
    primes: tuple[int, ...]
    q: float
    ratios: list[float]
    max_ratio: float
    best_trial: int
    C_est: float

    def to_json(self) -> dict:
        return {
            "primes": list(self.primes),
            "q": self.q,
            "max_ratio": self.max_ratio,
            "best_trial": self.best_trial,
            "C_est": self.C_est,
            "ratios": self.ratios,
        }


def prop1_ratio(primes: Sequence[int], supports: Mapping[tuple[int, ...], Sequence[int]], q: float,
                trials: int = 1, seed: int = 0) -> Prop1Report:
    """Measure ||sum_a F_a(p^a theta)||_q / (sum_a ||F_a||_q^2)^{1/2} over dilates.

    ``supports`` maps each exponent tuple a (one entry per prime) to the
    frequencies of F_a; every frequency must be coprime to every prime.
    Trial 0 uses unit coefficients, later trials complex Gaussian ones
    drawn from default_rng([seed, trial]).
    """
    primes = tuple(int(p) for p in primes)
    k = len(primes)
    for alpha, supp in supports.items():
        if len(alpha) != k:
            raise SumProductError(f"exponent tuple {alpha} does not match {k} primes")
        for n in supp:
            for p in primes:
                if math.gcd(int(n), p) != 1:
                    raise CoprimalityViolated(f"frequency {n} shares a factor with {p}")
    keys = sorted(supports)
    ratios = []
    for trial in range(max(1, trials)):
        rng = np.random.default_rng([seed, trial])
        comp_f: list[int] = []
        comp_c: list[complex] = []
        sq = 0.0
        for alpha in keys:
            supp = [int(n) for n in supports[alpha]]
            if trial == 0:
                coef = np.ones(len(supp), dtype=np.complex128)
            else:
                coef = rng.standard_normal(len(supp)) + 1j * rng.standard_normal(len(supp))
            sq += lq_norm(supp, coef, q) ** 2
            dil = math.prod(p ** a for p, a in zip(primes, alpha))
            comp_f.extend(n * dil for n in supp)
            comp_c.extend(coef.tolist())
        ratios.append(lq_norm(comp_f, comp_c, q) / math.sqrt(sq))
    best = int(np.argmax(ratios))
    max_ratio = ratios[best]
    c_est = max_ratio ** (1 / max(k, 1)) / q
    return Prop1Report(primes, q, ratios, max_ratio, best, c_est)
