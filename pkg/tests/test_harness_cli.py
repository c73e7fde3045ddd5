from __future__ import annotations

import csv
import io
import itertools
import json
import math
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sumprod.cli import main
from sumprod.errors import BudgetExceeded, InvalidSpec
from sumprod.harness import generate_family, parse_family, run_growth_experiment, verify_suite


# -- families ---------------------------------------------------------------------------

def test_family_examples():
    assert generate_family("ap:start=1,step=1,n=8").elements == tuple(range(1, 9))
    assert generate_family("gp:base=2,n=8").elements == tuple(2**i for i in range(8))
    g = generate_family("multiplicative_grid:primes=[2,3],bounds=[3,3]")
    assert set(g.elements) == {2**i * 3**j for i in range(3) for j in range(3)} and len(g) == 9
    assert generate_family("explicit:values=[5,3,5]").elements == (3, 5)


def test_positional_and_str_round_trip():
    spec = parse_family("ap:1,1,8")
    assert spec.get("n") == 8
    assert parse_family(str(spec)) == spec


@given(st.integers(1, 60), st.integers(1, 10**6), st.integers(0, 2**32))
def test_random_interval_cardinality_and_seed(n, lo, seed):
    text = f"random_interval:n={n},lo={lo},width={4 * n},seed={seed}"
    a, b = generate_family(text), generate_family(text)
    assert a == b and len(a) == n
    assert all(lo <= x < lo + 4 * n for x in a.elements)


@pytest.mark.parametrize("text", ["foo:1", "ap:start=1", "gp:base=1,n=3", "ap:1,1,0", "explicit:values=[0,1]",
                                  "random_interval:n=10,lo=0,width=5,seed=0"])
def test_invalid_specs(text):
    with pytest.raises(InvalidSpec):
        generate_family(text)


# -- growth experiments -------------------------------------------------------------

def test_growth_examples():
    r = run_growth_experiment("gp:base=2,n=8", k_max=2)
    assert r.rows[1] == (2, 36, 15)
    assert 36 == math.comb(8, 2) + 8
    r = run_growth_experiment("ap:1,1,8", k_max=2)
    table = {a * b for a in range(1, 9) for b in range(1, 9)}
    assert r.rows[1] == (2, 15, len(table))
    assert r.rows[0] == (1, 8, 8)


@given(st.sets(st.integers(1, 200), min_size=1, max_size=8), st.integers(2, 3))
def test_growth_columns(A, k_max):
    spec = "explicit:values=[" + ",".join(map(str, sorted(A))) + "]"
    r = run_growth_experiment(spec, k_max=k_max)
    N = len(A)
    for (k, s, p) in r.rows:
        assert s == len({sum(t) for t in itertools.product(A, repeat=k)})
        assert p == len({math.prod(t) for t in itertools.product(A, repeat=k)})
        assert s <= math.comb(N + k - 1, k) and p <= math.comb(N + k - 1, k)
    assert all(b[1] >= a[1] and b[2] >= a[2] for a, b in zip(r.rows, r.rows[1:]))


def test_growth_csv_and_json():
    r = run_growth_experiment("gp:base=2,n=8", k_max=3)
    fh = io.StringIO()
    r.write_csv(fh)
    rows = list(csv.reader(io.StringIO(fh.getvalue())))
    assert rows[0] == ["k", "sumset_size", "productset_size", "log_N_sumset", "log_N_productset"]
    assert [int(x) for x in rows[2][:3]] == [2, 36, 15]
    doc = r.to_json()
    assert "runtime" not in doc
    assert json.dumps(doc, sort_keys=True) == json.dumps(run_growth_experiment("gp:base=2,n=8", k_max=3).to_json(), sort_keys=True)


def test_growth_budget():
    with pytest.raises(BudgetExceeded) as info:
        run_growth_experiment("ap:1,1,30", k_max=4, budget=40)
    partial = info.value.partial
    assert partial.truncated and partial.rows[0] == (1, 30, 30)


def test_remark2_subset_below_full():
    r = run_growth_experiment("ap:1,1,40", k_max=3, remark2_delta=0.5, seed=4)
    rem = r.remark2
    assert len(rem["subset"]) == math.ceil(40**0.5)
    full = [p for _, _, p in r.rows]
    assert all(a <= b for a, b in zip(rem["productset"], full))
    assert rem["subset_below_full"]


# -- verify suite ---------------------------------------------------------------------

def test_verify_suite_tiny():
    rep = verify_suite(seed=0, scale="tiny")
    assert rep.passed
    assert rep.dumps() == verify_suite(seed=0, scale="tiny").dumps()
    assert not verify_suite(seed=0, scale="tiny", tamper=True).passed


# -- CLI ------------------------------------------------------------------------------

def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def test_cli_factor(capsys):
    code, out = run(["factor", "360", "--basis", "2,3,5"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["exponents"] == [3, 2, 1] and doc["factors"] == {"2": 3, "3": 2, "5": 1}


def test_cli_sumset_prodset_energy(capsys, tmp_path):
    code, out = run(["sumset", "gp:base=2,n=16", "-k", "2"], capsys)
    assert code == 0 and json.loads(out)["size"] == 136
    code, out = run(["prodset", "1,2,3,6", "-k", "2", "--elements"], capsys)
    assert json.loads(out)["elements"] == [1, 2, 3, 4, 6, 9, 12, 18, 36]
    path = tmp_path / "r.csv"
    code, out = run(["energy", "0,1,2", "--csv", str(path)], capsys)
    assert code == 0 and json.loads(out)["energy"] == 19
    assert path.read_text().splitlines() == ["n,count", "0,1", "1,2", "2,3", "3,2", "4,1"]


def test_cli_lambda_bounds_regularize(capsys):
    code, out = run(["lambda", "0,1,2", "--q", "4", "--restarts", "4"], capsys)
    assert code == 0 and json.loads(out)["lower"] >= 1.2053
    code, out = run(["bounds", "--pair", "iterated", "--gamma", "0.2", "--compact"], capsys)
    assert code == 0 and json.loads(out)["sampler"]["passed"]
    code, out = run(["regularize", "--n", "48", "--compact"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["audit"]["agree"] and "3.24" in doc["ledger"]


def test_cli_experiment_and_exit_codes(capsys, tmp_path):
    path = tmp_path / "g.csv"
    code, out = run(["experiment", "gp:base=2,n=16", "--driver", "--k-max", "2", "--csv", str(path)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["driver"]["verdict"] == "sum"
    assert path.read_text().splitlines()[2].startswith("2,136,31,")
    code, out = run(["experiment", "ap:1,1,30", "--k-max", "5", "--budget", "100"], capsys)
    assert code == 3 and json.loads(out)["truncated"]
    assert main(["experiment", "nope:1"]) == 2
    assert main(["bounds", "--config", str(tmp_path / "missing.cfg")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_cli_verify_byte_stable():
    cmd = [sys.executable, "-m", "sumprod.cli", "verify", "--scale", "tiny", "--seed", "3"]
    a = subprocess.run(cmd, capture_output=True, text=True)
    b = subprocess.run(cmd, capture_output=True, text=True)
    assert a.returncode == 0 and a.stdout == b.stdout
    t = subprocess.run(cmd + ["--tamper"], capture_output=True, text=True)
    assert t.returncode == 1
