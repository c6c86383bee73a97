"""End-to-end tests of the mforge command-line interface."""

import json
import shutil
import subprocess

import pytest

from momentflow.cli_runner import main


def _write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


FLOW_CFG = {
    "space": {"space": "p1_power", "d": 2},
    "function": "quadratic",
    "seed": 3,
    "flow": {"t_max": 40.0},
}


def test_flow_task_passes_and_writes_outputs(tmp_path):
    cfg = _write_cfg(tmp_path, FLOW_CFG)
    out = tmp_path / "out"
    rc = main(["flow", "--config", cfg, "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["schema_version"] == 1
    assert report["task"] == "flow"
    assert report["seed"] == 3
    assert report["passed"] is True
    for c in report["checks"]:
        assert set(c) >= {"name", "value", "threshold", "comparator", "passed"}
        assert c["passed"] is True
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == "t,energy,grad_norm,kn_value"
    rows = [tuple(map(float, ln.split(","))) for ln in lines[1:]]
    ts = [r[0] for r in rows]
    es = [r[1] for r in rows]
    assert ts[0] == 0.0
    assert all(b > a for a, b in zip(ts, ts[1:]))
    slack = 1e-9 * (1.0 + abs(es[0]))
    assert all(b <= a + slack for a, b in zip(es, es[1:]))


def test_explicit_components_point(tmp_path):
    cfg = dict(FLOW_CFG)
    cfg["point"] = {
        "kind": "components",
        "values": [[[1.0, 0.0], [0.5, 0.25]], [[0.0, 1.0], [1.0, 0.0]]],
    }
    out = tmp_path / "out"
    rc = main(["flow", "--config", _write_cfg(tmp_path, cfg), "--out", str(out)])
    assert rc == 0


def test_seed_override(tmp_path):
    cfg = _write_cfg(tmp_path, FLOW_CFG)
    out = tmp_path / "out"
    rc = main(["flow", "--config", cfg, "--out", str(out), "--seed", "7"])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["seed"] == 7


def test_failing_flow_exits_2_but_writes_report(tmp_path):
    cfg = dict(FLOW_CFG)
    cfg["flow"] = {"t_max": 0.05}  # far too short to converge
    out = tmp_path / "out"
    rc = main(["flow", "--config", _write_cfg(tmp_path, cfg), "--out", str(out)])
    assert rc == 2
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] is False
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    assert "terminal_grad_norm" in failed


def test_byte_determinism(tmp_path):
    cfg = _write_cfg(tmp_path, FLOW_CFG)
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        rc = main(["flow", "--config", cfg, "--out", str(out),
                   "--backend", "numpy"])
        assert rc == 0
        outs.append(out)
    a, b = outs
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


@pytest.mark.parametrize("task", ["decompose", "invariant", "extremal"])
def test_structure_tasks_pass(tmp_path, task):
    cfg = {
        "space": {"space": "p1_power", "d": 2},
        "function": "spectral:cosh",
        "seed": 1,
        "point": {"kind": "coincident"},
    }
    out = tmp_path / "out"
    rc = main([task, "--config", _write_cfg(tmp_path, cfg), "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["task"] == task and report["passed"] is True


def test_legendre_task_passes(tmp_path):
    cfg = {"seed": 5, "legendre": {"n": 48}}
    out = tmp_path / "out"
    rc = main(["legendre", "--config", _write_cfg(tmp_path, cfg),
               "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["n"] == 48


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as ei:
        main(["flow", "--out", str(tmp_path)])  # missing --config
    assert ei.value.code == 1
    with pytest.raises(SystemExit) as ei:
        main(["transmogrify"])  # unknown task
    assert ei.value.code == 1
    with pytest.raises(SystemExit) as ei:
        main([])  # no task at all
    assert ei.value.code == 1


def test_config_errors_exit_1(tmp_path):
    out = str(tmp_path / "out")
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    assert main(["flow", "--config", str(bad_json), "--out", out]) == 1
    assert main(["flow", "--config", str(tmp_path / "missing.json"),
                 "--out", out]) == 1
    bad_space = _write_cfg(tmp_path, {"space": {"space": "lens_space"}},
                           "bad_space.json")
    assert main(["flow", "--config", bad_space, "--out", out]) == 1
    # verify-all refuses non-strict functions before doing any work
    nonstrict = _write_cfg(
        tmp_path,
        {"space": {"space": "p1_power", "d": 2},
         "function": "indefinite_split"},
        "nonstrict.json")
    assert main(["verify-all", "--config", nonstrict, "--out", out]) == 1


def test_schema_task(tmp_path, capsys):
    rc = main(["schema", "--out", str(tmp_path)])
    assert rc == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema["properties"]["schema_version"]["const"] == 1
    assert "verify-all" in schema["properties"]["task"]["enum"]
    on_disk = json.loads((tmp_path / "report_schema.json").read_text())
    assert on_disk == schema


def test_console_script_installed():
    exe = shutil.which("mforge")
    assert exe is not None, "mforge entry point is not on PATH"
    run = subprocess.run([exe, "schema"], capture_output=True, text=True,
                         timeout=60)
    assert run.returncode == 0
    assert json.loads(run.stdout)["title"] == "mforge report"
