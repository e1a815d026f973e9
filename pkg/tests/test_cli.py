import json

import numpy as np
import pytest

from youden_drm.cli import main
from youden_drm.core import BasisSpec, TwoSampleData, YoudenEstimate
from youden_drm.cutoff import estimate
from youden_drm.dataio import DataFormatError, parse_dataset, write_dataset
from youden_drm.elfit import fit_from_theta
from youden_drm.region import logit_region, region_contains


@pytest.fixture
def lognormal_csv(tmp_path):
    rng = np.random.default_rng(2000)
    d = TwoSampleData(np.exp(rng.standard_normal(1000)), np.exp(1.35 + rng.standard_normal(1000)))
    path = tmp_path / "ln.csv"
    write_dataset(d, path)
    return path


@pytest.fixture
def small_csv(tmp_path):
    rng = np.random.default_rng(3)
    d = TwoSampleData(np.exp(rng.standard_normal(60)), np.exp(1.35 + rng.standard_normal(60)))
    path = tmp_path / "small.csv"
    write_dataset(d, path)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_minimal(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("value,group\n1.0,0\n2.0,0\n3.0,1\n4.0,1\n")
    d = parse_dataset(p)
    assert (d.n0, d.n1, d.rho) == (2, 2, 0.5)


def test_parse_bad_group_reports_line(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("value,group\n1.0,0\n2.0,2\n3.0,1\n")
    with pytest.raises(DataFormatError, match=r":3:"):
        parse_dataset(p)


@pytest.mark.parametrize("body", ["value,group\n1,0\n2,0\n", "x,y\n1,0\n", "value,group\nabc,0\n1,1\n", ""])
def test_parse_errors(tmp_path, body):
    p = tmp_path / "d.csv"
    p.write_text(body)
    with pytest.raises(DataFormatError):
        parse_dataset(p)


def test_parse_column_order_and_sorting(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("group,id,value\n1,a,5\n0,b,3\n0,c,1\n1,d,4\n")
    d = parse_dataset(p)
    assert d.healthy.tolist() == [1, 3] and d.diseased.tolist() == [4, 5]


def test_fit_lognormal_file(capsys, lognormal_csv):
    code, out, _ = run(capsys, "fit", "--input", lognormal_csv, "--basis", "log_x")
    assert code == 0
    res = json.loads(out)
    assert res["eta_hat"] == pytest.approx(0.75, abs=0.03)
    assert res["tau_hat"] == pytest.approx(0.75, abs=0.03)
    assert res["youden"] == pytest.approx(res["eta_hat"] + res["tau_hat"] - 1)


def test_fit_json_roundtrip_bit_exact(capsys, small_csv):
    _, out, _ = run(capsys, "fit", "--input", small_csv)
    res = json.loads(out)
    fit = fit_from_theta(parse_dataset(small_csv), BasisSpec(tuple(res["basis"])), res["theta_hat"])
    sol, est = estimate(fit)
    assert sol.cutoff == res["cutoff"]
    assert est.sensitivity == res["eta_hat"] and est.specificity == res["tau_hat"]
    assert fit.loglik == res["loglik"]


def test_identical_samples_warning_and_strict(capsys, tmp_path):
    p = tmp_path / "same.csv"
    v = [0.5, 1.0, 1.5, 2.0, 2.5]
    write_dataset(TwoSampleData(v, v), p)
    code, out, _ = run(capsys, "fit", "--input", p)
    assert code == 0
    res = json.loads(out)
    assert abs(res["youden"]) < 1e-8 and res["warnings"]
    code, _, err = run(capsys, "fit", "--input", p, "--strict")
    assert code == 4 and "degenerate" in err


def test_exit_codes(capsys, tmp_path, small_csv):
    assert run(capsys, "fit", "--input", tmp_path / "missing.csv")[0] == 2
    neg = tmp_path / "neg.csv"
    neg.write_text("value,group\n-1,0\n2,0\n3,1\n4,1\n")
    assert run(capsys, "fit", "--input", neg, "--basis", "log_x")[0] == 2
    sep = tmp_path / "sep.csv"
    sep.write_text("value,group\n1,0\n2,0\n3,1\n4,1\n")
    assert run(capsys, "fit", "--input", sep, "--basis", "x")[0] == 3
    assert run(capsys, "fit", "--input", small_csv, "--basis", "sin")[0] == 2
    assert run(capsys, "fit", "--input", small_csv, "--max-iter", "1", "--basis", "x,log_x,x2,log_x2")[0] == 3


def test_region_outputs_and_determinism(capsys, tmp_path, small_csv):
    args = ["region", "--input", small_csv, "--seed", 7, "--boot", 200]
    code, out1, _ = run(capsys, *args, "--boundary", tmp_path / "b1.csv")
    _, out2, _ = run(capsys, *args, "--boundary", tmp_path / "b2.csv")
    assert code == 0 and out1 == out2
    assert (tmp_path / "b1.csv").read_bytes() == (tmp_path / "b2.csv").read_bytes()
    res = json.loads(out1)
    assert set(res) >= {"center", "sigma", "level", "kind", "area"}
    assert res["kind"] == "logit"
    code, out3, _ = run(capsys, *args, "--threads", 3)
    assert out3 == out1
    _, wald, _ = run(capsys, *args, "--kind", "wald")
    assert json.loads(wald)["kind"] == "identity"


def test_region_levels_nested(capsys, tmp_path, small_csv):
    base = ["region", "--input", small_csv, "--seed", 7, "--boot", 200]
    r95 = json.loads(run(capsys, *base, "--level", 0.95)[1])
    r99 = json.loads(run(capsys, *base, "--level", 0.99, "--boundary", tmp_path / "b99.csv")[1])
    assert r99["area"] > r95["area"]
    est = YoudenEstimate(1.0, *r95["center"])
    inner = logit_region(est, np.array(r95["sigma"]), r95["n"], 0.95)
    outer = logit_region(est, np.array(r99["sigma"]), r99["n"], 0.99)
    assert all(region_contains(outer, p) for p in inner.boundary)
    assert not any(region_contains(inner, p) for p in outer.boundary)


def test_seed_required(capsys, small_csv):
    with pytest.raises(SystemExit):
        main(["region", "--input", str(small_csv)])


def test_gof_and_out_file(capsys, tmp_path, small_csv):
    out_path = tmp_path / "g.json"
    code, out, _ = run(capsys, "gof", "--input", small_csv, "--seed", 1, "--boot", 200, "--out", out_path)
    assert code == 0 and out == ""
    res = json.loads(out_path.read_text())
    assert 0 < res["p_value"] <= 1
    assert res["delta_n0"] == pytest.approx(res["delta_n1"], abs=1e-10)


def test_select_csv(capsys, tmp_path, small_csv):
    code, out, _ = run(capsys, "select", "--input", small_csv, "--out", tmp_path / "s.csv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "basis,aic,bic,rank" and len(lines) == 16
    assert (tmp_path / "s.csv").read_text().strip().splitlines() == lines
    code, out, _ = run(capsys, "select", "--input", small_csv, "--candidates", "x;log_x")
    assert len(out.strip().splitlines()) == 3


def test_simulate_command(capsys, tmp_path):
    args = ["simulate", "--family", "gamma", "--jstar", 0.5, "--reps", 4, "--boot", 100, "--seed", 3]
    code, out, _ = run(capsys, *args, "--csv", tmp_path / "t.csv")
    assert code == 0
    res = json.loads(out)
    assert res["replicates"] == 4 and res["family"] == "gamma"
    assert run(capsys, *args)[1] == out
    assert (tmp_path / "t.csv").read_text().startswith("distribution,n0,n1,J*")
