from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sumprod.bounds import (Constants, base_pair, check_admissible, compute_k_of_b, compute_Lambda,
                            default_lambda, lemma43_pair, lemma43_schedule, lemma51_factors,
                            lemma51_pair, pigeonhole_chain, theorem_driver, transform_extrema,
                            transform_pair)
from sumprod.errors import ChainTooShort, ConstantSearchFailed, EmptyFeasibleSet, InvalidSpec

LN_1E6 = math.log(1e6)


# -- base pair ----------------------------------------------------------------------

def test_base_pair_examples():
    p = base_pair(4, 2)
    out = p.evaluate(N=100, delta=1, K=1)
    assert out["phi"] == pytest.approx(100)
    # (K/delta)^C huge: psi takes the N^{1/2} branch
    out = p.evaluate(N=1e6, delta=0.01, K=100)
    assert out["psi"] == pytest.approx(1e3)


@given(st.floats(1, 60), st.floats(1e-3, 1), st.floats(1, 1e3), st.floats(1, 4))
def test_base_pair_formulas(ln_n, delta, K, C):
    p = base_pair(4, C)
    assert p.log_phi_ln(ln_n, delta, K) == pytest.approx(C * math.log(delta / K) + ln_n)
    assert p.log_phi_ln(ln_n, delta, K) <= ln_n + 1e-12
    want = min(math.log(4) * (K / delta) ** C, ln_n / 2)
    assert p.log_psi_ln(ln_n, delta, K) == pytest.approx(want)


def test_samplers_pass():
    assert check_admissible(base_pair()).passed
    for g in (0.05, 0.1, 0.3):
        assert check_admissible(lemma43_pair(g)).passed
    assert check_admissible(lemma51_pair(0.25, 0.25)).passed


def test_sampler_rejects_broken_pair():
    p = base_pair()
    bad = type(p)(lambda ln_n, d, K: -ln_n + 0 * d, p.log_psi_ln, {}, "broken")
    rep = check_admissible(bad)
    assert not rep.passed and rep.failures


# -- transform ----------------------------------------------------------------------

def test_transform_never_beats_base():
    p = base_pair()
    ext = transform_extrema(p, LN_1E6, 0.5, 4)
    assert ext["log_phi"] <= p.log_phi_ln(LN_1E6, 0.5, 4) + 1e-12
    # psi~ is Cq times the max of the product, so at the maximiser it is at least that product
    a = ext["argmax"]
    # argmax holds logs: (ln N', ln N'', ln delta', ln delta'', ln K', ln K'')
    e = [math.exp(x) for x in a]
    prod = p.log_psi_ln(a[0], e[2], e[4]) + p.log_psi_ln(a[1], e[3], e[5])
    assert ext["log_psi"] >= math.log(8) + prod - 1e-9


def test_transform_refinement_monotone():
    p = base_pair()
    prev = None
    for g in (5, 9, 17):
        ext = transform_extrema(p, LN_1E6, 0.5, 4, grid=g)
        if prev is not None:
            assert ext["log_phi"] <= prev["log_phi"] + 1e-12
            assert ext["log_psi"] >= prev["log_psi"] - 1e-12
        prev = ext


def test_transform_tiny_n():
    p = base_pair()
    with pytest.raises(EmptyFeasibleSet):
        transform_extrema(p, 0.0, 1.0, 1.0, grid=4)


def test_transform_pair_evaluates():
    t = transform_pair(base_pair(), grid=8)
    out = t.evaluate(N=1e6, delta=0.5, K=4)
    assert out["log_phi"] <= base_pair().log_phi_ln(LN_1E6, 0.5, 4)


# -- iterated pair --------------------------------------------------------------------

def test_iterated_pair_boundary():
    p = lemma43_pair(0.1)
    # log(K/delta) = 1 makes the loglog exponent vanish
    assert p.log_phi_ln(LN_1E6, 0.5, 0.5 * math.e) == pytest.approx(LN_1E6)


@given(st.floats(5, 200), st.floats(0.05, 1), st.floats(1, 50), st.floats(1.01, 3))
def test_iterated_psi_increases_in_K(ln_n, delta, K, f):
    p = lemma43_pair(0.2)
    assert p.log_psi_ln(ln_n, delta, K * f) >= p.log_psi_ln(ln_n, delta, K) - 1e-12


def test_iterated_power_regime():
    ln_n = math.log(1e12)
    p = lemma43_pair(0.1)
    K = math.exp(0.01 * ln_n)
    v = p.log_psi_ln(ln_n, 0.5, K)
    assert math.isfinite(v)
    L = math.log(K / 0.5)
    assert v - 0.1 * ln_n == pytest.approx(math.log(4) * L ** (2 / 0.1))


def test_iterated_schedule():
    s = lemma43_schedule(0.5, 4, 0.1)
    assert s["t"] == 2 ** s["ell"]
    assert s["log_A"] == pytest.approx(math.log(s["t"]) / 0.1)
    assert s["J_below_gamma_t"] is False


# -- large-N pair -------------------------------------------------------------------

def test_large_n_constants_and_factors():
    p = lemma51_pair(0.25, 0.25)
    c = p.constants
    assert c.A[0] < c.A[1] < c.A[2] and c.B[0] < c.B[1] < c.B[2]
    A1, A2 = c.A[0], c.A[1]
    assert 6 * A1 - math.log(20 / 11) * A2 + 40 <= 0
    assert A2 >= 10 * A1
    x = c.loglog_nbar
    for ln_n in (math.exp(x), math.exp(x) * 2, math.exp(x) * 4):
        for delta in (1e-3, 0.1, 0.9):
            f = lemma51_factors(c, ln_n, delta)
            assert f["ok"]
            assert f["u"] >= 0
    f = lemma51_factors(c, math.exp(x), 1.0)
    assert f["v"] == 0 and f["v_prime"] == 0


def test_large_n_fixed_nbar_and_failure():
    p = lemma51_pair(0.1, 0.1, loglog_nbar=200)
    assert p.constants.loglog_nbar == 200
    with pytest.raises(ConstantSearchFailed):
        lemma51_pair(0.01, 0.01)


# -- Lambda and k(b) ------------------------------------------------------------------

def test_lambda_example():
    v = compute_Lambda(Fraction(1, 2), Fraction(1, 2), 4, {"A1": 2, "A2": 3, "B1": 1, "B2": 2})
    assert v.value == 20 == 8 + 3 + 1 + 8
    assert all(v.consequences.values())


def test_lambda_blows_up_as_tau_shrinks():
    c = {"A1": 2, "A2": 3, "B1": 1, "B2": 2}
    vals = [compute_Lambda(Fraction(1, 10**j), Fraction(1, 2), 4, c).value for j in range(1, 6)]
    assert all(b > 10 * a / 11 for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 10**5


@given(st.fractions(Fraction(1, 1000), Fraction(1, 2)), st.fractions(Fraction(1, 1000), Fraction(1, 2)),
       st.fractions(Fraction(1, 100), 100), st.fractions(Fraction(1, 100), 100),
       st.fractions(Fraction(1, 100), 100), st.fractions(Fraction(1, 100), 100))
def test_lambda_consequences(tau, gamma, A1, A2, B1, B2):
    v = compute_Lambda(tau, gamma, 4, {"A1": A1, "A2": A2, "B1": B1, "B2": B2})
    assert v.value == 2 * A1 / tau + A2 + B1 + 2 * B2 / gamma
    assert v.value > 2 * A1 / tau and v.value > B1 and v.value * gamma > 2 * B2
    assert all(v.consequences.values())


def test_k_of_b():
    r = compute_k_of_b(1, Lambda_fn=lambda b: Fraction(33, 100))
    assert r["log2_k"] == 33 and r["k"] == 2**33 and not r["overflow"]
    r = compute_k_of_b(1, Lambda_fn=lambda b: 3.3)
    assert r["log2_k"] == 330 and r["overflow"] and r["k"] is None
    assert compute_k_of_b(2, Lambda_fn=lambda b: 1, remark_C=2)["remark_k"] == 2**16
    r1, r2 = compute_k_of_b(1), compute_k_of_b(2)
    assert r1["q"] == 4 and r2["q"] == 8 and r1["gamma"] == pytest.approx(0.01)
    assert r2["log2_k"] >= r1["log2_k"]
    assert r1["log2_k"] == math.ceil(100 * 1 * default_lambda(1))


# -- pigeonhole chain ---------------------------------------------------------------

def test_chain_examples():
    r = pigeonhole_chain([3, 9, 27, 81])
    assert r.k0 == 1 and r.ratio == 3
    r = pigeonhole_chain([10, 100, 100, 100])
    assert r.k0 == 2 and r.ratio == 1
    with pytest.raises(ChainTooShort):
        pigeonhole_chain([5])


@given(st.integers(1, 50), st.lists(st.integers(0, 40), min_size=1, max_size=8), st.integers(1, 4))
def test_chain_geometric_mean(N, steps, b):
    sizes = [N]
    for s in steps:
        sizes.append(sizes[-1] + s)
    r = pigeonhole_chain(sizes, b=b)
    ell = len(sizes) - 1
    assert r.ratio == min(r.trail)
    assert float(r.ratio) <= (sizes[-1] / sizes[0]) ** (1 / ell) * (1 + 1e-12)
    assert r.k0 == 2 ** r.ell0
    if sizes[-1] < N**b:
        assert float(r.ratio) < N ** ((b - 1) / ell) or N == 1


# -- driver ---------------------------------------------------------------------------

def test_driver_horns():
    v = theorem_driver([2**i for i in range(8)], b=2, k_max=3)
    assert v.verdict == "sum"
    for k, s, p in v.to_json()["growth"]:
        assert p == k * 7 + 1
    v = theorem_driver(range(1, 9), b=2, k_max=3)
    assert v.verdict == "product"
    for k, s, p in v.to_json()["growth"]:
        assert s == k * 7 + 1
    assert theorem_driver([5]).verdict == "degenerate"


def test_driver_dilation():
    A = [2**i for i in range(8)]
    assert theorem_driver([2 * a for a in A], k_max=3).verdict == theorem_driver(A, k_max=3).verdict
    # squaring doubles every exponent vector, so the product side is unchanged
    B = list(range(1, 9))
    rows = theorem_driver(B, k_max=3).to_json()["growth"]
    rows_sq = theorem_driver([b * b for b in B], k_max=3).to_json()["growth"]
    assert [r[2] for r in rows] == [r[2] for r in rows_sq]


# -- constants file -----------------------------------------------------------------

def test_constants_file(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\nC = 3\ngrid=8\nloglog_nbar = 50\n")
    c = Constants.from_file(str(f))
    assert c.C == 3 and c.grid == 8 and c.loglog_nbar == 50 and c.q == 4
    assert c.as_dict()["C0"] == 2
    with pytest.raises(InvalidSpec):
        Constants.from_text("bogus = 1")
