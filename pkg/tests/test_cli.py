import json
import subprocess
import sys

import pytest
import yaml

from kppdomain import cli, scenarios

STRIP = {"builder": "strip", "params": {"length": 20, "width_L": 2, "h": 0.125}}


def write_cfg(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def eigen_cfg(target, **extra):
    cfg = {"name": "e", "kind": "eigen", "domain": STRIP, "acceptance": {"lambda": {"target": target, "rel_tol": 0.01}}}
    cfg.update(extra)
    return cfg


def test_exit_ok_and_report(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["eigen", "--config", write_cfg(tmp_path, eigen_cfg(2.4674011002723395 * 1.0015)), "--out", str(out)])
    assert code == 0
    rep = json.loads((out / "e.json").read_text())
    assert rep["acceptance"]["passed"] and rep["results"]["lambda"] > 0
    assert "started" in json.loads((out / "e.meta.json").read_text())
    assert "PASS e" in capsys.readouterr().out


def test_exit_acceptance_failed(tmp_path):
    assert cli.main(["eigen", "--config", write_cfg(tmp_path, eigen_cfg(3.0)), "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize(
    "cfg",
    [
        {"name": "x", "kind": "eigen"},
        {"name": "x", "kind": "eigen", "domain": {"builder": "hexagon", "params": {}}},
        {"name": "x", "kind": "eigen", "domain": {"builder": "strip", "params": {"length": 5, "width_L": 2, "h": 0.1}}},
        {"name": "x", "kind": "eigen", "domain": STRIP, "solver": {"dt": -1}},
        {"name": "x", "kind": "nonuniqueness", "domain": STRIP,
         "reaction": {"preset": "weak_kpp_composite", "params": {"amplitude_g": 0.1, "amplitude_h": 0.8, "epsilon_smooth": 0.05}}},
    ],
)
def test_exit_validation(tmp_path, cfg, capsys):
    verb = {"eigen": "eigen", "nonuniqueness": "nonuniq"}[cfg["kind"]]
    assert cli.main([verb, "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_exit_validation_missing_file_and_kind_mismatch(tmp_path):
    assert cli.main(["eigen", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert cli.main(["lieb", "--config", write_cfg(tmp_path, eigen_cfg(1.0)), "--out", str(tmp_path)]) == 2


def test_exit_solver_failure(tmp_path):
    cfg = {"name": "u", "kind": "uniqueness", "domain": {"builder": "strip", "params": {"length": 40, "width_L": 4, "h": 0.25}},
           "solver": {"dt": 0.01, "max_steps": 3}}
    assert cli.main(["uniqueness", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 3
    rep = json.loads((tmp_path / "u.json").read_text())
    assert rep["stage"] == "solve"


def test_empty_suite_exits_zero(tmp_path):
    p = write_cfg(tmp_path, {"name": "empty", "scenarios": []}, "suite.yaml")
    assert cli.main(["suite", p, "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "suite_summary.json").read_text())
    assert summary["total"] == 0


def test_suite_with_failing_scenario(tmp_path, capsys):
    good = eigen_cfg(2.4674011002723395 * 1.0015)
    bad = eigen_cfg(2.0)
    bad["name"] = "mislabelled"
    p = write_cfg(tmp_path, {"name": "s", "scenarios": [good, bad]}, "suite.yaml")
    assert cli.main(["suite", p, "--out", str(tmp_path / "o"), "--workers", "2"]) == 1
    out = capsys.readouterr().out
    assert "FAIL mislabelled" in out and "PASS e" in out
    assert cli.main(["suite", p, "--out", str(tmp_path / "o2"), "--only", "e"]) == 0


def test_suite_referenced_configs(tmp_path):
    write_cfg(tmp_path, eigen_cfg(2.4674011002723395 * 1.0015), "one.yaml")
    p = write_cfg(tmp_path, {"name": "s", "scenarios": [{"config": "one.yaml"}]}, "suite.yaml")
    assert cli.main(["suite", p, "--out", str(tmp_path / "o")]) == 0
    q = write_cfg(tmp_path, {"name": "s", "scenarios": [{"config": "missing.yaml"}]}, "suite2.yaml")
    assert cli.main(["suite", q, "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["suite", str(tmp_path / "nothing.yaml")]) == 2


def test_reports_deterministic(tmp_path):
    cfg = {"name": "lieb", "kind": "lieb", "domain": STRIP, "params": {"R": 2.0, "stride": 1.0},
           "acceptance": {"satisfied": {"equals": True}}}
    path = write_cfg(tmp_path, cfg)
    assert cli.main(["lieb", "--config", path, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["lieb", "--config", path, "--out", str(tmp_path / "b"), "--serial"]) == 0
    for f in ["lieb.json", "lieb.scan.csv"]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_dump_fields(tmp_path):
    cfg = {"name": "st", "kind": "steady", "domain": {"builder": "strip", "params": {"length": 40, "width_L": 4, "h": 0.25}},
           "solver": {"dt": 1.0}, "params": {"initial": {"type": "constant", "value": 1.0}}}
    assert cli.main(["steady", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path), "--dump-fields"]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert "st.domain.txt" in names
    assert any(n.endswith(".f64") for n in names)


def test_shipped_suite_validates():
    items, _, doc = scenarios.load_suite(scenarios.shipped_suite())
    assert doc["name"] == "paper_checks"
    names = [c["name"] for c in items]
    assert len(names) == len(set(names))
    for cfg in items:
        scenarios.validate_config(cfg)


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "kppdomain.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "suite" in out.stdout
