"""Scenario runner and CLI plumbing."""

import json
from pathlib import Path

import pytest

from webcall.harness.cli import main
from webcall.harness.scenario import (
    ScenarioError,
    ScenarioRunner,
    load_scenario,
    run_scenario_file,
)

DATA = Path(__file__).resolve().parent.parent / "src/webcall/harness/data"


def test_fig2_scenario_reproduces_reference_trace():
    report = run_scenario_file(str(DATA / "fig2.json"))
    assert report["ok"], report["steps"]
    reference = json.loads((DATA / "fig2_trace.json").read_text())
    assert report["trace"] == reference


def test_scenario_is_deterministic():
    doc = load_scenario(str(DATA / "fig2.json"))
    first = ScenarioRunner(doc).run()
    second = ScenarioRunner(doc).run()
    assert first["trace"] == second["trace"]
    assert first["agents"] == second["agents"]


def test_reject_scenario():
    doc = {
        "name": "reject", "seed": 3,
        "steps": [
            {"op": "spawn", "agent": "a", "aor": "a@x.net"},
            {"op": "spawn", "agent": "b", "aor": "b@x.net"},
            {"op": "login", "agent": "a"},
            {"op": "login", "agent": "b"},
            {"op": "wait-for-state", "agent": "a", "state": "online"},
            {"op": "wait-for-state", "agent": "b", "state": "online"},
            {"op": "call", "agent": "a", "to": "b@x.net"},
            {"op": "wait-for-state", "agent": "b", "state": "invited"},
            {"op": "reject", "agent": "b"},
            {"op": "wait-for-state", "agent": "a", "state": "ended"},
            {"op": "assert", "agent": "a", "field": "reason",
             "equals": "rejected"},
        ],
    }
    report = ScenarioRunner(doc).run()
    assert report["ok"], report["steps"]


def test_failed_wait_marks_step_and_skips_rest():
    doc = {
        "seed": 1,
        "steps": [
            {"op": "spawn", "agent": "a"},
            {"op": "wait-for-state", "agent": "a", "state": "online",
             "timeout": 0.3},
            {"op": "assert", "agent": "a", "equals": "online"},
        ],
    }
    report = ScenarioRunner(doc).run()
    assert not report["ok"]
    assert report["steps"][1]["ok"] is False
    assert report["steps"][2]["ok"] is None  # skipped after the failure


def test_call_error_becomes_step_failure():
    doc = {
        "seed": 1,
        "steps": [
            {"op": "spawn", "agent": "a"},
            {"op": "accept", "agent": "a"},  # nothing to accept
        ],
    }
    report = ScenarioRunner(doc).run()
    assert not report["ok"]
    assert "call error" in report["steps"][1]["detail"]


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        ScenarioRunner({"steps": []})
    with pytest.raises(ScenarioError):
        ScenarioRunner({"steps": [{"op": "explode"}]})
    with pytest.raises(ScenarioError):
        ScenarioRunner({"steps": "not-a-list"})


def test_cli_exit_codes(tmp_path, capsys):
    ok = main(["scenario", str(DATA / "fig2.json")])
    assert ok == 0
    capsys.readouterr()

    failing = tmp_path / "fail.json"
    failing.write_text(json.dumps({
        "seed": 1,
        "steps": [{"op": "spawn", "agent": "a"},
                  {"op": "wait-for-state", "agent": "a", "state": "online",
                   "timeout": 0.2}],
    }))
    assert main(["scenario", str(failing)]) == 1
    capsys.readouterr()

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["scenario", str(bad)]) == 2
    assert main(["scenario", str(tmp_path / "missing.json")]) == 2


def test_cli_report_file(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["scenario", str(DATA / "fig2.json"),
                 "--report", str(out)]) == 0
    capsys.readouterr()
    report = json.loads(out.read_text())
    assert report["ok"] and report["name"] == "fig2-call-establishment"
