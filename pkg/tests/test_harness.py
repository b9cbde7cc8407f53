import csv
import json
import os

import numpy as np
import pytest

from mcl import cli, parallel
from mcl.errors import ConfigError, IoError
from mcl.harness import report as rp
from mcl.harness.config import ExperimentConfig, compile_expression, parse_complex_matrix
from mcl.harness.experiments import BUILTIN, builtin_config, run_experiment


def test_config_defaults_and_validation():
    cfg = ExperimentConfig.from_dict({"kind": "bvp", "params": {"problems": 10}})
    assert cfg.params["system"] == "cubic-straightened" and cfg.params["problems"] == 10
    bad = [
        {"kind": "nope"},
        {"kind": "flow", "params": {"n": -1}},
        {"kind": "flow", "params": {"bogus": 1}},
        {"kind": "flow", "params": {"n": 2.5}},
        {"kind": "flow", "params": {"n": True}},
        {"kind": "flow", "tolerances": {"ode": -1}},
        {"kind": "flow", "seed": -3},
        {"kind": "flow", "extra": 1},
        {"kind": "bvp", "params": {"system": "lorenz"}},
        {"kind": "duality", "params": {"map": "custom"}},
        {"kind": "reduction", "params": {"N": 7}},
        [],
    ]
    for d in bad:
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)


def test_config_file_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(p))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(tmp_path / "missing.json"))


def test_expression_sandbox():
    f = compile_expression("exp(i*theta) * cos(2*theta) - 1/2", ("theta",))
    th = np.array([[0.0], [1.0]])
    assert np.allclose(f(th), np.exp(1j * th[:, 0]) * np.cos(2 * th[:, 0]) - 0.5)
    for text in ("__import__('os')", "theta.real", "x + 1", "[1, 2]", "exp(theta, 2)", "1 +"):
        with pytest.raises(ConfigError):
            compile_expression(text, ("theta",))


def test_parse_complex_matrix():
    M = parse_complex_matrix([[1, [0, 1]], [0, [2.5, -1]]])
    assert M[0, 1] == 1j and M[1, 1] == 2.5 - 1j
    with pytest.raises(ConfigError):
        parse_complex_matrix([["a"]])


def _small_report():
    rep = rp.VerificationReport("demo", "forms", seed=3)
    rep.add("a", 1.0 + 2e-12, 1.0, "trivial", 1e-10)
    rep.add("b", 0.5j, 0.5j, "derived", 1e-12)
    rep.add("c", [1, 2], [1, 2], "property", None, passed=True, note="list")
    rep.tables["t"] = {"columns": ["x", "y"], "rows": [[1.0, 2.0], [2.0, 4.0]], "plot": True}
    return rep


def test_report_roundtrip_and_digest():
    rep = _small_report()
    assert rep.status == "PASS"
    back = rp.VerificationReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back.canonical_json() == rep.canonical_json()
    assert back.digest() == rep.digest()
    rep.add("d", 1.0, 2.0, "paper", 0.1)
    assert rep.status == "FAIL"
    rep.invalid_hypothesis = True
    assert rep.status == "INVALID-HYPOTHESIS"
    with pytest.raises(ValueError):
        rep.add("e", 1, 1, "folklore")


def test_emit_formats(tmp_path):
    rep = _small_report()
    assert rp.emit_report(rep, "json", str(tmp_path / "j"), plots=True) == "PASS"
    data = json.loads((tmp_path / "j" / "report.json").read_text())
    assert data["reports"][0]["rows"][1]["computed"] == {"re": 0.0, "im": 0.5}
    assert (tmp_path / "j" / "demo.t.png").stat().st_size > 1000
    lines = (tmp_path / "j" / "demo.t.dat").read_text().splitlines()
    assert lines[0] == "# x y" and lines[2].split() == ["2", "4"]
    rp.emit_report(rep, "csv", str(tmp_path / "c"))
    with open(tmp_path / "c" / "demo.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["name", "computed", "reference"] and len(rows) == 4
    assert (tmp_path / "c" / "demo.t.csv").exists()


def test_emit_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        rp.emit_report(_small_report(), "json", str(blocker / "sub"))


def test_reproducible_reports():
    cfg = builtin_config("bvp-linear")
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a.canonical_json() == b.canonical_json()


def test_builtins_are_valid():
    for name in BUILTIN:
        assert builtin_config(name).name == name
    with pytest.raises(ConfigError):
        builtin_config("nope")


def test_worker_count(monkeypatch):
    monkeypatch.setenv("MCL_THREADS", "3")
    assert parallel.worker_count() == 3
    monkeypatch.setenv("MCL_THREADS", "0")
    assert parallel.worker_count() == 1
    assert parallel.ordered_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]
    monkeypatch.setenv("MCL_THREADS", "4")
    assert parallel.ordered_map(lambda x: -x, range(20)) == [-x for x in range(20)]


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["list", "experiments"]) == 0
    assert "duality-s3" in capsys.readouterr().out
    out = tmp_path / "o"
    assert cli.main(["verify", "duality", "--config", "builtin:duality-gm3", "--out", str(out), "--csv"]) == 0
    assert (out / "duality-gm3.csv").exists()
    assert cli.main(["verify", "duality", "--config", "builtin:duality-negative-control"]) == 1
    assert cli.main(["verify", "flow", "--config", "builtin:duality-gm3"]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "flow"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "flow", "--config", "x", "--seed", "-1"])
    assert exc.value.code == 2


def test_cli_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "forms.json"
    cfg.write_text(json.dumps({"kind": "duality", "params": {"map": "custom", "manifold": "S1",
                                                             "entries": [["exp(i*theta)", "0"], ["0", "1"]]}}))
    assert cli.main(["verify", "duality", "--config", str(cfg), "--seed", "9", "--quad-order", "48", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["status"] == "PASS" and data["reports"][0]["seed"] == 9
    out = tmp_path / "plots"
    assert cli.main(["verify", "bvp", "--config", "builtin:bvp-linear", "--out", str(out), "--plots"]) == 0
    assert any(f.endswith(".png") for f in os.listdir(out))
    assert (out / "report.json").exists()
