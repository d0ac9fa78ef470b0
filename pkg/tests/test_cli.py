import csv
import json
import subprocess
import sys

import pytest

from gumbel_stein.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, RunConfig, main
from gumbel_stein.errors import DomainError


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_config_validation():
    assert RunConfig("coupon-rate", 16, 128).n_grid() == [16, 32, 64, 128]
    assert RunConfig("verify-identity", 2, 4, "linear").n_grid() == [2, 3, 4]
    with pytest.raises(DomainError):
        RunConfig("verify-identity", 1, 3)
    with pytest.raises(DomainError):
        RunConfig("coupon-rate", 16, 8)
    with pytest.raises(DomainError):
        RunConfig("coupon-rate", samples=0)
    with pytest.raises(DomainError):
        RunConfig("coupon-rate", format="xml")


def test_verify_identity_enumerate(tmp_path, capsys):
    out = tmp_path / "id.csv"
    assert main(["verify-identity", "--out", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert {r["n"] for r in rows} == {"2", "3"}
    one = next(r for r in rows if r["n"] == "2" and r["f_prime"] == "one")
    assert float(one["lhs"]) == pytest.approx(1.0) and float(one["rhs"]) == pytest.approx(1.0)
    assert all(r["passed"] == "yes" for r in rows)


def test_verify_identity_monte_carlo(capsys):
    rc = main(["verify-identity", "--mode", "monte_carlo", "--n-min", "3", "--n-max", "3", "--samples", "200000"])
    assert rc == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_verify_identity_rejects_n1(capsys):
    assert main(["verify-identity", "--n-min", "1"]) == EXIT_CONFIG
    assert "n >= 2" in capsys.readouterr().err


def test_verify_identity_enumerate_budget(capsys):
    assert main(["verify-identity", "--n-min", "5", "--n-max", "5"]) == EXIT_CONFIG


def test_coupon_rate_kolmogorov(tmp_path):
    out = tmp_path / "rate.csv"
    assert main(["coupon-rate", "--n-min", "16", "--n-max", "4096", "--out", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert list(rows[0]) == ["n", "metric", "distance", "log_n_over_n", "fitted_constant", "fit_exponent"]
    assert [int(r["n"]) for r in rows] == [2 ** k for k in range(4, 13)]
    assert 0.85 <= float(rows[0]["fit_exponent"]) <= 1.15


def test_coupon_rate_dictionary_trend(tmp_path):
    out = tmp_path / "dict.csv"
    args = ["coupon-rate", "--metric", "dict_lip2", "--mode", "monte_carlo", "--samples", "100000",
            "--n-max", "1024", "--out", str(out)]
    assert main(args) == EXIT_OK
    d = [float(r["distance"]) for r in read_rows(out)]
    assert all(v > 0 for v in d)
    assert sum(b > a for a, b in zip(d, d[1:])) <= 2


def test_coupon_rate_json(tmp_path):
    out = tmp_path / "rate.json"
    assert main(["coupon-rate", "--n-max", "128", "--format", "json", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["n_values"] == [16, 32, 64, 128]


def test_coupon_rate_degenerate_grid(capsys):
    assert main(["coupon-rate", "--n-min", "16", "--n-max", "64"]) == EXIT_CONFIG
    assert "at least 4" in capsys.readouterr().err


def test_gap_profile_schema(tmp_path):
    out = tmp_path / "gap.csv"
    assert main(["gap-profile", "--h", "x", "--n", "16", "--out", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert list(rows[0]) == ["t", "gap", "A1", "A2", "A3", "envelope"]
    for r in rows:
        total = float(r["A1"]) + float(r["A2"]) + float(r["A3"])
        assert total == pytest.approx(float(r["gap"]), abs=1e-9)


def test_gap_profile_zero_function(tmp_path):
    out = tmp_path / "zero.csv"
    assert main(["gap-profile", "--h", "zero", "--c-hat", "0", "--out", str(out)]) == EXIT_OK
    for r in read_rows(out):
        assert all(r[c] == "0" for c in ("gap", "A1", "A2", "A3", "envelope"))


def test_gap_profile_forced_violation(tmp_path, capsys):
    assert main(["gap-profile", "--c-hat", "0", "--out", str(tmp_path / "g.csv")]) == EXIT_FAIL
    assert "FAIL envelope" in capsys.readouterr().out


def test_gap_profile_unknown_function(capsys):
    assert main(["gap-profile", "--h", "nope"]) == EXIT_CONFIG


def test_verify_semigroup_identity_time(capsys):
    assert main(["verify-semigroup", "--t", "0"]) == EXIT_OK


def test_verify_semigroup_negative_control(tmp_path, capsys):
    out = tmp_path / "sg.csv"
    rc = main(["verify-semigroup", "--t", "0.5", "--inject-bug", "--out", str(out)])
    assert rc == EXIT_FAIL
    text = capsys.readouterr().out
    assert "FAIL stationarity" in text
    rows = {r["suite"]: r for r in read_rows(out)}
    assert rows["stationarity"]["passed"] == "no"
    assert json.loads(rows["stationarity"]["worst_case"])["f"]


def test_verify_stein(capsys):
    assert main(["verify-stein"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "PASS stein_residual" in text and "PASS exponential_counterexample" in text


@pytest.mark.parametrize("args", [
    ["coupon-rate", "--metric", "dict_lip2", "--mode", "monte_carlo", "--samples", "50000", "--n-max", "256"],
    ["gap-profile", "--mode", "monte_carlo", "--samples", "20000"],
    ["verify-identity", "--mode", "monte_carlo", "--n-min", "4", "--n-max", "4", "--samples", "20000"],
])
def test_same_seed_same_bytes(tmp_path, args):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(args + ["--seed", "7", "--out", str(a)])
    main(args + ["--seed", "7", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    main(args + ["--seed", "8", "--out", str(c)])
    assert c.read_bytes() != a.read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gumbel_stein", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "coupon-rate" in res.stdout
