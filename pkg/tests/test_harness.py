"""
Tests for the command-line harness: exit codes, reports, note files.
"""
import json

import harness
from harness import EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK, main

SMALL = ["--zeta", "8", "--xi", "2", "--n-otm", "64", "--noise-p", "0.0", "--trials", "5"]


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    assert "honest-chain" in capsys.readouterr().out


def test_run_writes_report(tmp_path):
    out = tmp_path / "report.json"
    code = main(["run", "--scenario", "double-spend-classical-copy", "--seed", "3", *SMALL, "--out", str(out)])
    assert code == EXIT_OK
    report = json.loads(out.read_text())
    assert report["scenario"] == "double-spend-classical-copy"
    assert report["seed"] == 3
    assert report["config"]["zeta"] == 8
    assert report["checks"]["no_double_spend"] is True


def test_run_to_stdout(capsys):
    assert main(["run", "--scenario", "double-spend-classical-copy", *SMALL]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["passed"] is True


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"zeta": 8, "xi": 2, "n_otm": 64, "noise_p": 0.0, "trials": 3}))
    out = tmp_path / "r.json"
    assert main(["run", "--scenario", "double-spend-classical-copy", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["config"]["trials"] == 3


def test_config_errors_exit_1(tmp_path):
    assert main(["run", "--scenario", "no-such-thing"]) == EXIT_CONFIG
    assert main(["run", "--zeta", "4", "--xi", "4"]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text('{"zeta": 8, "flavour": 1}')
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG


def test_failed_check_exits_2(monkeypatch):
    def failing(config):
        return {"scenario": config.scenario, "seed": config.seed, "config": config.to_dict(),
                "metrics": {}, "checks": {"always_fails": False}, "passed": False, "elapsed_seconds": 0.0}

    monkeypatch.setattr(harness, "run_scenario", failing)
    assert main(["run", "--scenario", "double-spend-classical-copy", *SMALL]) == EXIT_ASSERTION


def test_mint_demo_and_inspect(tmp_path, capsys):
    note = tmp_path / "note.bin"
    ledger = tmp_path / "ledger.json"
    args = ["mint-demo", "--out", str(note), "--zeta", "8", "--xi", "2", "--verify", "2", "--redeem",
            "--ledger", str(ledger)]
    assert main(args) == EXIT_OK
    assert note.exists()
    assert len(json.loads(ledger.read_text())) == 1
    capsys.readouterr()
    assert main(["inspect", str(note)]) == EXIT_OK
    assert "sealed OTMs" in capsys.readouterr().out


def test_inspect_garbage_exits_1(tmp_path):
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"\x01not a note")
    assert main(["inspect", str(junk)]) == EXIT_CONFIG
