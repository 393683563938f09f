import json
import subprocess
import sys

import pytest

from wsnsim.cli import eta_grid, main
from wsnsim.netgraph import NetworkGraph


def test_eta_grid():
    assert eta_grid(0.1, 1.0, 0.1) == tuple(round(0.1 * i, 1) for i in range(1, 11))
    assert eta_grid(0.3, 0.3, 0.1) == (0.3,)


def test_run_writes_csv(tmp_path):
    out = tmp_path / "r.csv"
    code = main(["run", "--n", "12", "--side", "1.2", "--radius", "0.5", "--trials", "3",
                 "--eta-start", "0.5", "--eta-stop", "1.0", "--eta-step", "0.5", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("algorithm,n,L,lambda,eta,h") and len(lines) == 3


def test_run_from_config_json(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"algorithm": "dsa2", "n": 12, "side": 1.2, "radius": 0.5,
                               "trials": 2, "eta_grid": [1.0]}))
    assert main(["run", "--config", str(cfg), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["rows"][0]["algorithm"] == "dsa2" and doc["rows"][0]["P_s"] == 1.0


def test_config_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--n", "0"]) == 1
    assert main(["run", "--trials", "0"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 10, "colour": "red"}')
    assert main(["run", "--config", str(bad)]) == 1
    sweep = tmp_path / "s.json"
    sweep.write_text('{"n_values": [50, 100]}')
    assert main(["scaling", "--config", str(sweep)]) == 1
    assert "config error" in capsys.readouterr().err


def test_scaling_command(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"algorithm": "dsa2", "n_values": [20, 30, 45, 60], "density": 10.0, "runs": 1}))
    out = tmp_path / "rep.json"
    assert main(["scaling", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert len(rep["points"]) == 4 and "tx_per_origin_n_free" in rep["checks"]


def test_trace_outputs(tmp_path):
    paths = {k: tmp_path / f"{k}.out" for k in ("events", "stores", "graph", "inference")}
    code = main(["trace", "--alg", "dsa2", "--n", "10", "--side", "1.0", "--radius", "0.5", "--seed", "3",
                 "--out", str(paths["events"]), "--stores", str(paths["stores"]),
                 "--graph", str(paths["graph"]), "--inference", str(paths["inference"])])
    assert code == 0
    events = [json.loads(line) for line in paths["events"].read_text().splitlines()]
    assert events and all(set(e) == {"round", "from", "to", "origin", "counter", "accepted"} for e in events)
    assert len(json.loads(paths["stores"].read_text())) == 10
    assert NetworkGraph.load(paths["graph"]).n == 10
    assert paths["inference"].read_text().startswith("node_id,degree,sum_b_v,c_u,counter")


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wsnsim.cli", "run", "--n", "5", "--radius", "-1"],
                          capture_output=True, text=True)
    assert proc.returncode == 1


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])


def test_integrity_violation_exit_2(monkeypatch, capsys):
    import wsnsim.harness as harness
    from wsnsim.errors import IntegrityError

    def broken(stores, truth):
        raise IntegrityError("slot mismatch")

    monkeypatch.setattr(harness, "check_ledger", broken)
    assert main(["run", "--n", "12", "--side", "1.2", "--radius", "0.5", "--trials", "2"]) == 2
    assert "integrity violation" in capsys.readouterr().err
