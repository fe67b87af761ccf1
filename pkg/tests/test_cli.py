import json
import subprocess
import sys
from pathlib import Path

import pytest

from swapcal import cli
from swapcal.audit import audit
from swapcal.distributions import DiscreteJoint, Predictor
from swapcal.hypotheses import HypothesisClass

DATA = Path(cli.__file__).parent / "data"


def run(*argv):
    code = cli.main([str(a) for a in argv])
    return code


def shipped(name):
    d = DATA / f"{name}_instance"
    return ["--dist", d / "dist.json", "--pred", d / "pred.json", "--class", d / "class.json"]


def test_shipped_files_match_builders(glm, parity):
    for name, (dist, pred, cls) in (("glm", glm), ("parity", parity)):
        d = DATA / f"{name}_instance"
        assert DiscreteJoint.from_json(json.loads((d / "dist.json").read_text())).ids == dist.ids
        assert Predictor.from_json(json.loads((d / "pred.json").read_text())) == pred
        assert HypothesisClass.from_json(json.loads((d / "class.json").read_text())).names == cls.names


def test_audit_shipped_glm(tmp_path):
    out = tmp_path / "report.json"
    assert run("audit", *shipped("glm"), "--out", out) == 0
    report = json.loads(out.read_text())
    assert report["mce"] == 0.125 and report["calibration_error"] == 0.0


def test_audit_with_losses(tmp_path):
    out = tmp_path / "report.json"
    assert run("audit", "--instance", "glm", "--loss", "squared", "--budget", "2", "--grid-step", "1/8", "--out", out) == 0
    regrets = json.loads(out.read_text())["regrets"]
    assert abs(regrets["per_loss"][0]["swap_agnostic_regret"] - 1 / 64) <= 1e-12
    assert abs(regrets["per_loss"][0]["omniprediction_regret"]) <= 1e-9


def test_audit_missing_file(tmp_path, capsys):
    code = run("audit", "--dist", tmp_path / "nope.json", "--pred", tmp_path / "p.json", "--class", tmp_path / "c.json")
    assert code == 2
    assert "cannot read" in capsys.readouterr().err


def test_audit_missing_flag(capsys):
    assert run("audit", "--dist", "x.json") == 2


def test_audit_bad_json(tmp_path):
    bad = tmp_path / "d.json"
    bad.write_text("[1, 2")
    assert run("audit", "--dist", bad, "--pred", bad, "--class", bad) == 2


def test_audit_invalid_class(tmp_path):
    d = DATA / "glm_instance"
    cls = tmp_path / "c.json"
    cls.write_text(json.dumps({"members": [{"name": "1", "table": {k: 1.0 for k in
                                                                   json.loads((d / "pred.json").read_text())["values"]}}]}))
    assert run("audit", "--dist", d / "dist.json", "--pred", d / "pred.json", "--class", cls) == 2


def test_unknown_loss_is_input_error():
    assert run("audit", "--instance", "glm", "--loss", "hinge") == 2


def test_separations(tmp_path, capsys):
    out = tmp_path / "sep.json"
    assert run("separations", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] and all(c["passed"] for c in doc["checks"])
    assert "parity.l4_loss_oi" in capsys.readouterr().out


def test_boost_round_trip_and_determinism(tmp_path):
    inst = tmp_path / "inst"
    assert run("instance", "--name", "random", "--seed", "7", "--out-dir", inst) == 0
    args = ["boost", "--dist", inst / "dist.json", "--class", inst / "class.json", "--alpha", "0.05"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(*args, "--out", a, "--trace", tmp_path / "a.jsonl") == 0
    assert run(*args, "--out", b, "--trace", tmp_path / "b.jsonl") == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    doc = json.loads(a.read_text())
    dist = DiscreteJoint.from_json(json.loads((inst / "dist.json").read_text()))
    cls = HypothesisClass.from_json(json.loads((inst / "class.json").read_text()))
    again = audit(dist, Predictor.from_json(doc), cls)
    assert again.smce == doc["boost"]["smce"] and again.smce <= 0.05


def test_boost_did_not_converge(tmp_path):
    trace = tmp_path / "t.jsonl"
    code = run("boost", "--instance", "glm", "--alpha", "0.001", "--max-iterations", "1", "--trace", trace)
    assert code == 1
    assert len(trace.read_text().splitlines()) == 1


def test_audit_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("audit", *shipped("parity"), "--loss", "p_power:p=4", "--grid-step", "1/3", "--out", a)
    run("audit", *shipped("parity"), "--loss", "p_power:p=4", "--grid-step", "1/3", "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_postprocess(tmp_path):
    out = tmp_path / "pp.json"
    d = DATA / "glm_instance"
    assert run("postprocess", "--pred", d / "pred.json", "--dist", d / "dist.json",
               "--loss", "half_squared", "--loss", "logistic:T=10", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["image"] == [0.125, 0.875]
    hs = doc["losses"][0]["actions"]
    assert [row["k"] for row in hs] == pytest.approx([0.125, 0.875], abs=1e-9)
    assert run("postprocess", "--pred", d / "pred.json") == 2


def test_thread_env(monkeypatch):
    monkeypatch.setenv("SWAPCAL_THREADS", "1")
    assert run("audit", "--instance", "parity", "--out", "/dev/null") == 0
    monkeypatch.setenv("SWAPCAL_THREADS", "zero")
    assert run("audit", "--instance", "parity") == 2


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "swapcal.cli", "separations"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"]
