import csv
import json
import math

import numpy as np
import pytest

from covol import __version__, cli
from covol.coefficients import CoefficientSpec
from covol.ratefn import ldp_rate_constant
from covol.verify import CriterionResult


@pytest.fixture
def const_spec(tmp_path):
    path = tmp_path / "const.json"
    path.write_text(CoefficientSpec.constant(1.0, 1.0, 0.5).to_json())
    return str(path)


def run_json(capsys, argv):
    code = cli.run(argv)
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_simulate_rows(tmp_path, const_spec, capsys):
    out = tmp_path / "path.csv"
    code, payload, _ = run_json(capsys, ["simulate", "--spec", const_spec, "--n", "100", "--seed", "7", "--out", str(out)])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2"] and len(rows) == 102
    assert payload["version"] == __version__
    assert payload["config"]["spec"]["rho"] == {"constant": 0.5}


def test_simulate_reproducible(tmp_path, const_spec, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for target in (a, b):
        cli.run(["simulate", "--spec", const_spec, "--n", "20", "--seed", "3", "--out", str(target)])
    capsys.readouterr()
    assert a.read_text() == b.read_text()


def test_simulate_many(tmp_path, const_spec, capsys):
    code, payload, _ = run_json(
        capsys, ["simulate", "--spec", const_spec, "--n", "5", "--seed", "1", "--paths", "3", "--out", str(tmp_path / "p.csv")]
    )
    assert code == 0 and len(payload["files"]) == 3
    assert payload["files"][2].endswith("p_0002.csv")


def test_estimate(tmp_path, const_spec, capsys):
    out = tmp_path / "p.csv"
    cli.run(["simulate", "--spec", const_spec, "--n", "50", "--seed", "2", "--out", str(out)])
    capsys.readouterr()
    code, payload, _ = run_json(capsys, ["estimate", "--path", str(out)])
    assert code == 0
    assert payload["rho_hat"] == pytest.approx(payload["c"] / math.sqrt(payload["q1"] * payload["q2"]))


def test_rate_vector(const_spec, capsys):
    code, payload, _ = run_json(capsys, ["rate", "--spec", const_spec, "--x", "1.2,1.0,0.6"])
    assert code == 0 and payload["attained"] is True
    assert payload["rate"] == pytest.approx(ldp_rate_constant([1.2, 1.0, 0.6], 1, 1, 0.5), abs=1e-9)
    assert len(payload["argmax_lambda"]) == 3


def test_rate_query_json(const_spec, capsys):
    q = json.dumps({"u": 0.1, "statistic": "correlation", "scale": "mdp"})
    code, payload, _ = run_json(capsys, ["rate", "--spec", const_spec, "--query", q])
    assert code == 0
    assert payload["rate"] == pytest.approx(0.01 / (2 * 0.5625))


def test_rate_off_cone_is_inf(const_spec, capsys):
    code, payload, _ = run_json(capsys, ["rate", "--spec", const_spec, "--x", "1,1,2"])
    assert code == 0 and payload["rate"] == "inf" and payload["attained"] is False


def test_rate_needs_one_query(const_spec, capsys):
    code, _, err = run_json(capsys, ["rate", "--spec", const_spec])
    assert code == 1 and "exactly one" in err


def test_tail(const_spec, capsys):
    argv = ["tail", "--spec", const_spec, "--component", "c", "--direction", ">=", "--threshold", "0.7",
            "--n", "50", "--paths", "2000", "--seed", "4"]
    code, payload, _ = run_json(capsys, argv)
    assert code == 0 and payload["method"] == "tilted"
    assert payload["config"]["threshold"] == 0.7
    _, again, _ = run_json(capsys, argv + ["--threads", "2"])
    assert again["p_hat"] == payload["p_hat"]


def test_tail_curve_csv(tmp_path, const_spec, capsys):
    target = tmp_path / "curve.csv"
    code, payload, _ = run_json(
        capsys,
        ["tail", "--spec", const_spec, "--component", "q1", "--direction", ">=", "--threshold", "1.3",
         "--n", "10", "--paths", "500", "--curve", "10,20", "--csv", str(target)],
    )
    assert code == 0 and [r["n"] for r in payload["curve"]] == [10, 20]
    assert target.read_text().splitlines()[0] == "n,empirical_rate,predicted_rate,p_hat,std_err"


def test_config_file_and_override(tmp_path, const_spec, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 30, "paths": 200, "seed": 1}))
    code, payload, _ = run_json(capsys, ["covcheck", "--spec", const_spec, "--config", str(cfg), "--n", "40"])
    assert code == 0 and payload["n"] == 40 and payload["paths"] == 200


def test_unknown_config_field(tmp_path, const_spec, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 30, "paths": 200, "bogus": 1}))
    code, _, err = run_json(capsys, ["covcheck", "--spec", const_spec, "--config", str(cfg)])
    assert code == 1 and "bogus" in err


def test_bad_spec_field(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    doc = CoefficientSpec.constant(1.0, 1.0, 0.0).to_dict()
    doc["sigma9"] = 1
    bad.write_text(json.dumps(doc))
    code, _, err = run_json(capsys, ["rate", "--spec", str(bad), "--x", "1,1,0"])
    assert code == 1 and "sigma9" in err


def test_malformed_json(capsys):
    code, _, _ = run_json(capsys, ["rate", "--spec", "{not json", "--x", "1,1,0"])
    assert code == 1


def test_missing_required(const_spec, capsys):
    code, _, err = run_json(capsys, ["simulate", "--spec", const_spec, "--n", "10"])
    assert code == 1 and "seed" in err


def test_numerical_failure_exit_code(tmp_path, capsys):
    # wildly different volatilities make the CLT covariance numerically singular
    spec = tmp_path / "s.json"
    spec.write_text(CoefficientSpec.constant(1.0, 1e-5, 0.0).to_json())
    code, _, err = run_json(capsys, ["rate", "--spec", str(spec), "--x", "1,1,0", "--scale", "mdp"])
    assert code == 2 and "numerical" in err


def test_verify_structure(const_spec, capsys):
    code, payload, err = run_json(capsys, ["verify", "--spec", const_spec, "--level", "quick", "--only", "3,4"])
    assert code == 0 and payload["all_passed"]
    assert [c["number"] for c in payload["criteria"]] == [3, 4]
    assert all("name" in c and "passed" in c for c in payload["criteria"])
    assert "[PASS]" in err
    assert payload["spec_checks"]


def test_verify_failure_exit(monkeypatch, capsys):
    fail = CriterionResult(7, "dummy", False, 1.0, 0.1, {}, 0.0)
    monkeypatch.setattr(cli, "run_battery", lambda *a, **k: [fail])
    code, payload, err = run_json(capsys, ["verify", "--level", "quick"])
    assert code == 2 and payload["all_passed"] is False and "[FAIL]" in err


def test_version(capsys):
    assert cli.run(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_seventeen_digits():
    assert json.loads(cli.dumps({"x": 0.1})) == {"x": 0.1}
    assert cli.dumps({"x": 1 / 3}) == '{"x": 0.33333333333333331}'
    assert json.loads(cli.dumps({"x": np.float64(math.nan)}))["x"] is None
