"""Numeric evaluators for admissible pairs (phi, psi) and the surrounding bound calculus.

Everything is evaluated in natural-log space: the interesting regimes have
values like q^{(log K/delta)^{C/gamma}} or N = exp(exp(13)) that overflow
doubles.  Evaluators take ``ln_n`` (the natural log of N) together with
delta in (0, 1] and K >= 1, and accept numpy arrays so grids vectorize.

Logarithmic loss factors such as log(K/delta) are floored at 1 (see
``lg``); at desk scale K/delta can be close to 1 and an unfloored log
would vanish or change sign.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    ChainTooShort,
    ConstantSearchFailed,
    EmptyFeasibleSet,
    InvalidSpec,
    SumProductError,
)

LOG_20_11 = math.log(20 / 11)
_EXP_LIMIT = 700.0


def lg(x):
    """max(log x, 1), elementwise."""
    return np.maximum(np.log(x), 1.0)


@dataclass
class Constants:
    """Free constants of the bound calculus; every field can come from a config file."""

    C: float = 2.0
    C0: float = 2.0
    cq_factor: float = 2.0  # the "C" in Cq
    grid: int = 16
    c_exp: float = 1.0  # c in K/delta > exp((log N)^{c gamma})
    rho: float = 1e-6  # K/delta < N^rho regime for the large-N pair
    loglog_nbar: float | None = None
    q: float = 4.0

    @classmethod
    def from_file(cls, path) -> "Constants":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_text(cls, text: str) -> "Constants":
        out = cls()
        known = {f for f in cls.__dataclass_fields__}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidSpec(f"config line is not key = value: {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise InvalidSpec(f"unknown config key {key!r}")
            if key == "grid":
                setattr(out, key, int(value))
            elif value.lower() in ("none", ""):
                setattr(out, key, None)
            else:
                setattr(out, key, float(value))
        return out

    def as_dict(self) -> dict:
        return asdict(self)


LogEvaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class AdmissiblePair:
    """phi (extractable subgraph size) and psi (moment constant), in log form."""

    log_phi_ln: LogEvaluator
    log_psi_ln: LogEvaluator
    params: dict
    provenance: str
    regime: Callable[[np.random.Generator | None], tuple] | None = None

    def log_phi(self, N, delta, K):
        return self.log_phi_ln(np.log(N), delta, K)

    def log_psi(self, N, delta, K):
        return self.log_psi_ln(np.log(N), delta, K)

    def evaluate(self, N=None, delta=1.0, K=1.0, ln_n=None) -> dict:
        ln_n = math.log(N) if ln_n is None else ln_n
        lphi = float(self.log_phi_ln(ln_n, delta, K))
        lpsi = float(self.log_psi_ln(ln_n, delta, K))
        overflow = max(lphi, lpsi) > _EXP_LIMIT
        return {
            "provenance": self.provenance,
            "inputs": {"ln_N": ln_n, "delta": delta, "K": K},
            "params": self.params,
            "log_phi": lphi,
            "log_psi": lpsi,
            "phi": None if lphi > _EXP_LIMIT else math.exp(lphi),
            "psi": None if lpsi > _EXP_LIMIT else math.exp(lpsi),
            "overflow": overflow,
        }


def base_pair(q: float = 4.0, C: float = 2.0) -> AdmissiblePair:
    """phi = (delta/K)^C N,  psi = min(q^{(K/delta)^C}, N^{1/2})."""
    if q < 2 or C <= 0:
        raise SumProductError("base pair needs q >= 2 and C > 0")
    lq = math.log(q)

    def log_phi(ln_n, delta, K):
        return C * (np.log(delta) - np.log(K)) + ln_n

    def log_psi(ln_n, delta, K):
        with np.errstate(over="ignore"):
            expo = lq * np.exp(np.minimum(C * (np.log(K) - np.log(delta)), _EXP_LIMIT))
        return np.minimum(expo, 0.5 * ln_n)

    return AdmissiblePair(log_phi, log_psi, {"q": q, "C": C}, "base", regime=_default_regime)


def _default_regime(rng=None):
    """10 x 10 x 10 log-spaced grid: N in [2, 1e12], delta in [1e-6, 1], K in [1, 1e6]."""
    ln_n = np.linspace(math.log(2), math.log(1e12), 10)
    ln_d = np.linspace(math.log(1e-6), 0.0, 10)
    ln_k = np.linspace(0.0, math.log(1e6), 10)
    return ln_n, np.exp(ln_d), np.exp(ln_k)


# ---------------------------------------------------------------------------
# admissibility sampler


@dataclass
class SamplerReport:
    provenance: str
    points: int
    failures: dict
    passed: bool


def check_admissible(pair: AdmissiblePair, rtol: float = 1e-9) -> SamplerReport:
    """Sample monotonicity and the scaling property phi(N) <= (N/M) phi(M), M <= N.

    Checked between neighbouring points of the pair's 10 x 10 x 10 regime
    grid: phi, psi non-decreasing in N; phi non-decreasing in delta and
    non-increasing in K; psi non-decreasing in K.
    """
    regime = pair.regime or _default_regime
    ln_n, deltas, ks = regime(None)
    LN, D, K = np.meshgrid(ln_n, deltas, ks, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        phi = pair.log_phi_ln(LN, D, K)
        psi = pair.log_psi_ln(LN, D, K)

    def tol(a, b):
        return rtol * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))

    failures = {}

    def check(name, ok):
        bad = int(np.size(ok) - np.count_nonzero(ok))
        if bad:
            failures[name] = bad

    # inf - inf on overflowed rows gives nan, which counts as a failure
    with np.errstate(invalid="ignore"):
        check("phi_increasing_N", phi[1:] - phi[:-1] >= -tol(phi[1:], phi[:-1]))
        check("psi_increasing_N", psi[1:] - psi[:-1] >= -tol(psi[1:], psi[:-1]))
        check("phi_increasing_delta", phi[:, 1:] - phi[:, :-1] >= -tol(phi[:, 1:], phi[:, :-1]))
        check("phi_decreasing_K", phi[:, :, 1:] - phi[:, :, :-1] <= tol(phi[:, :, 1:], phi[:, :, :-1]))
        check("psi_increasing_K", psi[:, :, 1:] - psi[:, :, :-1] >= -tol(psi[:, :, 1:], psi[:, :, :-1]))
        # scaling: log phi(N) - ln N <= log phi(M) - ln M for every M <= N on the grid
        scaled = phi - LN
        check("phi_scaling", scaled[1:] - scaled[:-1] <= tol(scaled[1:], scaled[:-1]))
    return SamplerReport(pair.provenance, int(LN.size), failures, not failures)


# ---------------------------------------------------------------------------
# the product transform


def _constraint_axes(ln_n: float, delta: float, K: float, n: int):
    lk = math.log(K)
    ld = math.log(delta)
    lkd = lk - ld
    d_lo = ld - 6 * math.log(float(lg(K / delta)))
    k_hi = -6 * ld + 20 * math.log(float(lg(K))) + lk
    n_axis = np.linspace(0.0, ln_n, n)
    d_axis = np.linspace(d_lo, 0.0, n)
    k_axis = np.linspace(0.0, max(k_hi, 0.0), n)
    limits = {
        "prod_lower": ln_n + 40 * (ld - math.log(float(lg(K)))),
        "sum_upper": 20 * lkd + 0.5 * ln_n,
        "delta_lower": d_lo,
        "K_upper": k_hi,
    }
    return n_axis, d_axis, k_axis, limits


def transform_extrema(pair: AdmissiblePair, ln_n: float, delta: float, K: float,
                      grid: int = 16, cq: float | None = None) -> dict:
    """Grid minimum of phi'phi'' and Cq-weighted maximum of psi'psi''.

    The feasible set is every grid tuple (N', N'', delta', delta'', K', K'')
    with
        N >= N'N'' > N (delta / log K)^40,
        N' + N'' < (K/delta)^20 N^{1/2},
        delta' delta'' > (log K/delta)^{-6} delta,
        K' K'' < delta^{-6} (log K)^20 K,
    and N', N'' >= 1, delta', delta'' <= 1, K', K'' >= 1.  Refining a grid
    of n points to 2n - 1 keeps every old point, so the minimum can only
    go down and the maximum only up.
    """
    q = pair.params.get("q", 4.0)
    cq = (2.0 * q) if cq is None else cq
    n_axis, d_axis, k_axis, lim = _constraint_axes(ln_n, delta, K, grid)
    D1, D2, K1, K2 = np.meshgrid(d_axis, d_axis, k_axis, k_axis, indexing="ij")
    dk_ok = (D1 + D2 > lim["delta_lower"]) & (K1 + K2 < lim["K_upper"])
    d1, d2, k1, k2 = D1[dk_ok], D2[dk_ok], K1[dk_ok], K2[dk_ok]
    ed1, ed2, ek1, ek2 = np.exp(d1), np.exp(d2), np.exp(k1), np.exp(k2)
    best_min, best_max = math.inf, -math.inf
    argmin = argmax = None
    feasible = 0
    for a in n_axis:
        for b in n_axis:
            if not (a + b <= ln_n + 1e-12 and a + b > lim["prod_lower"]
                    and np.logaddexp(a, b) < lim["sum_upper"]):
                continue
            if not d1.size:
                continue
            feasible += d1.size
            lphi = pair.log_phi_ln(a, ed1, ek1) + pair.log_phi_ln(b, ed2, ek2)
            lpsi = pair.log_psi_ln(a, ed1, ek1) + pair.log_psi_ln(b, ed2, ek2)
            i = int(np.argmin(lphi))
            if lphi[i] < best_min:
                best_min = float(lphi[i])
                argmin = (a, b, float(d1[i]), float(d2[i]), float(k1[i]), float(k2[i]))
            j = int(np.argmax(lpsi))
            if lpsi[j] > best_max:
                best_max = float(lpsi[j])
                argmax = (a, b, float(d1[j]), float(d2[j]), float(k1[j]), float(k2[j]))
    if not feasible:
        raise EmptyFeasibleSet(f"no feasible grid point at ln N={ln_n}, delta={delta}, K={K}")
    return {
        "log_phi": best_min,
        "log_psi": math.log(cq) + best_max,
        "argmin": argmin,
        "argmax": argmax,
        "feasible_points": feasible,
        "limits": lim,
        "grid": grid,
    }


def transform_pair(pair: AdmissiblePair, grid: int = 16, cq: float | None = None) -> AdmissiblePair:
    """The product transform of a pair, evaluated by grid extrema (scalar inputs)."""

    def log_phi(ln_n, delta, K):
        return transform_extrema(pair, float(ln_n), float(delta), float(K), grid, cq)["log_phi"]

    def log_psi(ln_n, delta, K):
        return transform_extrema(pair, float(ln_n), float(delta), float(K), grid, cq)["log_psi"]

    params = dict(pair.params, grid=grid, cq=cq if cq is not None else 2.0 * pair.params.get("q", 4.0))
    return AdmissiblePair(log_phi, log_psi, params, f"transform({pair.provenance})")


# ---------------------------------------------------------------------------
# iterated pair


def lemma43_pair(gamma: float, q: float = 4.0, C: float = 2.0) -> AdmissiblePair:
    """phi = (delta/K)^{C loglog(K/delta)} N,  psi = q^{(log K/delta)^{C/gamma}} N^gamma.

    log log(K/delta) is clamped at 0, so phi = N whenever K/delta <= e.
    """
    if not 0 < gamma < 1:
        raise SumProductError("gamma must lie in (0, 1)")
    lq = math.log(q)

    def log_phi(ln_n, delta, K):
        L = np.maximum(np.log(K) - np.log(delta), 0.0)
        LL = np.log(np.maximum(L, 1.0))
        return -C * LL * L + ln_n

    def log_psi(ln_n, delta, K):
        L = np.maximum(np.log(K) - np.log(delta), 0.0)
        with np.errstate(over="ignore"):
            return lq * np.power(L, C / gamma) + gamma * ln_n

    pair = AdmissiblePair(log_phi, log_psi, {"gamma": gamma, "q": q, "C": C}, "iterated",
                          regime=_default_regime)
    return pair


def lemma43_schedule(delta: float, K: float, gamma: float, log_a_multiplier: float = 1.0) -> dict:
    """Depth schedule 2^l = t ~ log(K/delta) and log A ~ log(t)/gamma, taken with equality.

    Also reports the count bound |J| < 10^3 t log t / log A and whether it
    falls below gamma * t.
    """
    L = max(math.log(K / delta), 1.0)
    ell = max(0, math.ceil(math.log2(L)))
    t = 2 ** ell
    log_a = log_a_multiplier * math.log(t) / gamma if t > 1 else 0.0
    j_bound = 1e3 * t * math.log(t) / log_a if log_a > 0 else 0.0
    return {
        "ell": ell,
        "t": t,
        "log_A": log_a,
        "J_bound": j_bound,
        "J_below_gamma_t": j_bound < gamma * t,
    }


# ---------------------------------------------------------------------------
# large-N pair


@dataclass
class Lemma51Constants:
    A: tuple[float, float, float]
    B: tuple[float, float, float]
    multipliers: dict
    loglog_nbar: float


def _factor_logs(consts: Lemma51Constants, llN, ln_delta) -> dict:
    A1, A2, A3 = consts.A
    B1, B2, B3 = consts.B
    return {
        "u": -(20 * A1 + 6 * A2 * llN + 40) * llN + 0.9 * A3 * llN ** 2,
        "v": (6 * A1 - LOG_20_11 * A2 + 40) * ln_delta,
        "u_prime": (20 * B1 + 6 * B2 * llN) * llN - 0.9 * B3 * llN ** 2,
        "v_prime": (-6 * B1 + B2 * LOG_20_11) * ln_delta,
    }


def lemma51_factors(consts: Lemma51Constants, ln_n: float, delta: float) -> dict:
    """Natural logs of the four induction factors; u, v must be >= 0, u', v' <= 0."""
    llN = math.log(ln_n)
    logs = _factor_logs(consts, llN, math.log(delta))
    logs["ok"] = logs["u"] >= 0 and logs["v"] >= 0 and logs["u_prime"] <= 0 and logs["v_prime"] <= 0
    return logs


_MULTIPLIERS = (1.0, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0, 50.0, 75.0, 100.0)


def _choose_constants(tau, gamma, x, C0, c_exp, samples) -> Lemma51Constants:
    A1 = C0 * x
    B1 = math.exp(x * (1 - c_exp * gamma))
    llns, ln_deltas = samples

    def first(mults, ok):
        for m in mults:
            if ok(m):
                return m
        return None

    a2 = first(_MULTIPLIERS, lambda m: all(
        (6 * A1 - LOG_20_11 * m * A1 + 40) * ld >= 0 for ld in ln_deltas))
    if a2 is None:
        raise ConstantSearchFailed(f"no A2 multiplier makes v >= 1 (A1={A1})")
    A2 = a2 * A1
    a3 = first(_MULTIPLIERS, lambda m: all(
        -(20 * A1 + 6 * A2 * l + 40) * l + 0.9 * m * A2 * l * l >= 0 for l in llns))
    if a3 is None:
        raise ConstantSearchFailed(f"no A3 multiplier makes u >= 1 (A2={A2}, loglogN={min(llns)})")
    b2 = first(_MULTIPLIERS, lambda m: all((-6 * B1 + m * B1 * LOG_20_11) * ld <= 0 for ld in ln_deltas))
    if b2 is None:
        raise ConstantSearchFailed(f"no B2 multiplier makes v' <= 1 (B1={B1})")
    B2 = b2 * B1
    b3 = first(_MULTIPLIERS, lambda m: all(
        (20 * B1 + 6 * B2 * l) * l - 0.9 * m * B2 * l * l <= 0 for l in llns))
    if b3 is None:
        raise ConstantSearchFailed(f"no B3 multiplier makes u' <= 1 (B2={B2})")
    return Lemma51Constants((A1, A2, a3 * A2), (B1, B2, b3 * B2),
                            {"a2": a2, "a3": a3, "b2": b2, "b3": b3}, x)


def lemma51_pair(tau: float, gamma: float, loglog_nbar: float | None = None, q: float = 4.0,
                 C0: float = 2.0, c_exp: float = 1.0, rho: float = 1e-6) -> AdmissiblePair:
    """phi = K^{-A1} delta^{A2 llN} e^{A3 llN^2} N^{1-tau},
    psi = K^{B1} delta^{-B2 llN} e^{-B3 llN^2} N^gamma   (llN = log log N).

    A1 = C0 loglog(Nbar), B1 = (log Nbar)^{1 - c gamma}; the multipliers
    A2/A1, A3/A2, B2/B1, B3/B2 are the smallest entries of a fixed grid
    that make the induction factors u, v >= 1 and u', v' <= 1 at every
    sampled point of the regime log N in [log Nbar, 4 log Nbar],
    K/delta < N^rho.  Nbar is given through loglog_nbar; when omitted the
    smallest integer value >= 3 for which the admissibility sampler passes
    is used.
    """
    if not (0 < tau < 0.5 and 0 < gamma < 0.5):
        raise SumProductError("tau and gamma must lie in (0, 1/2)")
    candidates = [loglog_nbar] if loglog_nbar is not None else [float(x) for x in range(3, 701)]
    last_err = None
    for x in candidates:
        regime = _lemma51_regime(x, rho)
        ln_n, deltas, ks = regime(None)
        samples = (np.log(ln_n), np.log(deltas))
        try:
            # large x overflows some factor inequalities to inf/nan, which read as "fails"
            with np.errstate(over="ignore", invalid="ignore"):
                consts = _choose_constants(tau, gamma, x, C0, c_exp, samples)
        except ConstantSearchFailed as err:
            last_err = err
            continue
        pair = _lemma51_from_constants(tau, gamma, q, consts, regime, C0, c_exp, rho)
        if loglog_nbar is not None or check_admissible(pair).passed:
            return pair
        last_err = ConstantSearchFailed(f"admissibility sampler failed at loglog Nbar = {x}")
    raise last_err or ConstantSearchFailed("no constants found")


def _lemma51_regime(x: float, rho: float):
    def regime(rng=None):
        ln_nbar = math.exp(x)
        ln_n = np.exp(np.linspace(x, x + math.log(4), 10))
        # the regime allows log(K/delta) up to rho log N; sample a bounded slice of it
        span = min(rho * ln_nbar / 2, 50.0)
        deltas = np.exp(np.linspace(-span, 0.0, 10))
        ks = np.exp(np.linspace(0.0, span, 10))
        return ln_n, deltas, ks

    return regime


def _lemma51_from_constants(tau, gamma, q, consts, regime, C0, c_exp, rho) -> AdmissiblePair:
    A1, A2, A3 = consts.A
    B1, B2, B3 = consts.B

    def log_phi(ln_n, delta, K):
        llN = np.log(ln_n)
        return -A1 * np.log(K) + A2 * llN * np.log(delta) + A3 * llN ** 2 + (1 - tau) * ln_n

    def log_psi(ln_n, delta, K):
        llN = np.log(ln_n)
        return B1 * np.log(K) - B2 * llN * np.log(delta) - B3 * llN ** 2 + gamma * ln_n

    params = {
        "tau": tau, "gamma": gamma, "q": q, "C0": C0, "c_exp": c_exp, "rho": rho,
        "A": list(consts.A), "B": list(consts.B), "multipliers": consts.multipliers,
        "loglog_nbar": consts.loglog_nbar,
    }
    pair = AdmissiblePair(log_phi, log_psi, params, "large_N", regime=regime)
    pair.constants = consts
    return pair


# ---------------------------------------------------------------------------
# Lambda, k(b), pigeonhole chain


@dataclass
class LambdaValue:
    value: float
    terms: dict
    consequences: dict


def compute_Lambda(tau, gamma, q, constants) -> LambdaValue:
    """Lambda = 2 A1/tau + A2 + B1 + 2 B2/gamma.

    ``constants`` is a Lemma51Constants or a mapping with A1, A2, B1, B2.
    Fraction inputs give an exact Fraction result.
    """
    if isinstance(constants, Lemma51Constants):
        A1, A2 = constants.A[0], constants.A[1]
        B1, B2 = constants.B[0], constants.B[1]
    else:
        A1, A2, B1, B2 = (constants[k] for k in ("A1", "A2", "B1", "B2"))
    if tau <= 0 or gamma <= 0:
        raise SumProductError("tau and gamma must be positive")
    terms = {"2A1/tau": 2 * A1 / tau, "A2": A2, "B1": B1, "2B2/gamma": 2 * B2 / gamma}
    value = terms["2A1/tau"] + A2 + B1 + terms["2B2/gamma"]
    consequences = {
        "Lambda > 2A1/tau": value > terms["2A1/tau"],
        "Lambda > B1": value > B1,
        "Lambda*gamma/(2B2) > 1": value * gamma > 2 * B2,
    }
    return LambdaValue(value, {**terms, "q": q}, consequences)


def default_lambda(b: int, constants: Constants | None = None) -> float:
    """Lambda(b) at gamma = 1/(100 b), q = 4b.

    The sum-product exponent comes from the graph statement at halved
    parameters (tau = gamma/2 after the covering step, then halved again
    for the large-N pair), plus 2 for the quotient-set covering loss.
    """
    cfg = constants or Constants()
    gamma = 1.0 / (100 * b)
    tau = gamma / 2
    x = cfg.loglog_nbar if cfg.loglog_nbar is not None else 13.0
    pair = lemma51_pair(tau / 2, gamma / 4, loglog_nbar=x, q=4 * b,
                        C0=cfg.C0, c_exp=cfg.c_exp, rho=cfg.rho)
    return compute_Lambda(tau, gamma / 2, 4 * b, pair.constants).value + 2


def compute_k_of_b(b: int, Lambda_fn: Callable[[int], float] | None = None,
                   remark_C: int | None = None) -> dict:
    """k(b) = 2^ceil(100 b Lambda(b)), reported as log2 k once k leaves 64 bits."""
    if b < 1:
        raise SumProductError("b must be >= 1")
    lam = (Lambda_fn or default_lambda)(b)
    log2_k = math.ceil(100 * b * lam)
    out = {
        "b": b,
        "Lambda": lam,
        "log2_k": log2_k,
        "k": 2 ** log2_k if log2_k < 64 else None,
        "overflow": log2_k >= 64,
        "gamma": 1.0 / (100 * b),
        "q": 4 * b,
    }
    if remark_C is not None:
        out["remark_k"] = remark_C ** (b ** 4)
    return out


@dataclass
class ChainResult:
    k0: int
    ell0: int
    ratio: Fraction
    trail: list[Fraction]
    geometric_mean: float
    premise: bool | None = None
    guaranteed_bound: float | None = None
    guarantee_holds: bool | None = None


def pigeonhole_chain(sizes: Sequence[int], b: float | None = None) -> ChainResult:
    """Pick the doubling step 2^l0 with the smallest ratio |2^{l+1}A| / |2^l A|.

    Ties go to the smallest l.  The minimum never exceeds the geometric mean
    (sizes[l] / sizes[0])^{1/l}; when sizes[l] < N^b that is below N^{(b-1)/l}.
    """
    sizes = [int(s) for s in sizes]
    ell = len(sizes) - 1
    if ell < 1:
        raise ChainTooShort("need at least two chain entries")
    if any(b_ < a for a, b_ in zip(sizes, sizes[1:])) or sizes[0] < 1:
        raise SumProductError("chain sizes must be positive and non-decreasing")
    trail = [Fraction(b_, a) for a, b_ in zip(sizes, sizes[1:])]
    ell0 = min(range(ell), key=lambda j: (trail[j], j))
    gmean = (sizes[-1] / sizes[0]) ** (1 / ell)
    res = ChainResult(2 ** ell0, ell0, trail[ell0], trail, gmean)
    if b is not None:
        N = sizes[0]
        res.premise = sizes[-1] < N ** b
        res.guaranteed_bound = N ** ((b - 1) / ell)
        res.guarantee_holds = (not res.premise) or float(res.ratio) < res.guaranteed_bound
    return res


# ---------------------------------------------------------------------------
# desk-scale driver


@dataclass
class DriverVerdict:
    N: int
    b: int
    chain: list[int]
    chain_result: ChainResult | None
    B_size: int | None
    growth: list[tuple[int, int, int]]
    verdict: str
    exponents: dict
    truncated: bool = False

    def to_json(self) -> dict:
        cr = self.chain_result
        return {
            "N": self.N,
            "b": self.b,
            "chain": self.chain,
            "k0": cr.k0 if cr else None,
            "chain_ratio": float(cr.ratio) if cr else None,
            "B_size": self.B_size,
            "growth": [list(r) for r in self.growth],
            "verdict": self.verdict,
            "exponents": self.exponents,
            "truncated": self.truncated,
        }


def theorem_driver(A, b: int = 2, k_max: int = 4, chain_depth: int = 3,
                   budget: int = 10**7) -> DriverVerdict:
    """Enact the sum/product dichotomy on a concrete set.

    Builds the doubling chain |2^j E| of the exponent embedding E, picks the
    flattest step k0 by pigeonhole, and tabulates |kA| against |A^(k)| for
    k <= k_max.  The verdict names the side with the larger growth exponent
    at the largest k reached; it is an empirical reading, nothing more.
    """
    from .exponent_lattice import embed_set
    from .setops import IntSet, iterated_sumset

    vals = sorted({int(a) for a in A})
    N = len(vals)
    if N == 0:
        raise SumProductError("empty set")
    if N == 1:
        return DriverVerdict(1, b, [1], None, 1, [(k, 1, 1) for k in range(1, k_max + 1)],
                             "degenerate", {})
    _, E = embed_set(vals)
    chain = [N]
    truncated = False
    cur = E
    for _ in range(chain_depth):
        try:
            cur = iterated_sumset(cur, 2, budget=budget)
        except BudgetExceeded:
            truncated = True
            break
        chain.append(len(cur))
    chain_result = pigeonhole_chain(chain, b) if len(chain) > 1 else None
    if chain_result is None:
        raise BudgetExceeded("doubling chain did not get past the first step", partial=chain)
    B_size = chain[chain_result.ell0]

    S = IntSet.of(vals)
    growth = []
    for k in range(1, k_max + 1):
        try:
            s = len(iterated_sumset(S, k, budget=budget))
            p = len(iterated_sumset(E, k, budget=budget))
        except BudgetExceeded:
            truncated = True
            break
        growth.append((k, s, p))
    k_last, s_last, p_last = growth[-1]
    e_sum = math.log(s_last) / math.log(N)
    e_prod = math.log(p_last) / math.log(N)
    if s_last > p_last:
        verdict = "sum"
    elif p_last > s_last:
        verdict = "product"
    else:
        verdict = "tie"
    exponents = {"k": k_last, "sum": e_sum, "product": e_prod,
                 "sum_exceeds_N^b": s_last > N ** b, "product_exceeds_N^b": p_last > N ** b}
    return DriverVerdict(N, b, chain, chain_result, B_size, growth, verdict, exponents, truncated)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float)
