import json
import subprocess
import sys
import urllib.request
from pathlib import Path

import pytest

from eohazard.cli import EXIT_OK, EXIT_STAGE_FAILURE, EXIT_STATS, EXIT_USAGE, main
from eohazard.orchestrator import read_records

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "ds"
    assert main(["make-dataset", "--out", str(root), "-n", "6", "--seed", "2"]) == EXIT_OK
    return root


def test_make_dataset_writes_manifest(dataset):
    doc = json.loads((dataset / "manifest.json").read_text())
    assert len(doc["entries"]) == 6


def test_run_stats_report(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--manifest", str(dataset / "manifest.json"), "--out", str(out),
                 "--config", str(CONFIGS / "workflow.json")])
    assert code == EXIT_OK
    records = read_records(out / "records.jsonl")
    assert len(records) == 12
    capsys.readouterr()
    assert main(["stats", "--records", str(out / "records.jsonl")]) == EXIT_OK
    table = capsys.readouterr().out
    assert "No event" in table and "Event (wildfire or flood)" in table
    assert main(["report", "--records", str(out / "records.jsonl"), "--out", str(out / "rep"),
                 "--method", "spearman"]) == EXIT_OK
    assert {p.name for p in (out / "rep").iterdir()} == {"report.json", "report.txt", "plot_data.csv"}
    assert json.loads((out / "rep" / "report.json").read_text())["correlation"]["method"] == "spearman"


def test_run_over_http_with_env_root(dataset, tmp_path, monkeypatch):
    monkeypatch.setenv("EOHAZARD_DATASET_ROOT", str(dataset))
    out = tmp_path / "http"
    assert main(["run", "--out", str(out), "--transport", "http", "--modes", "routed"]) == EXIT_OK
    assert {r.mode.value for r in read_records(out / "records.jsonl")} == {"routed"}


def test_run_with_simnet(dataset, tmp_path):
    out = tmp_path / "sim"
    assert main(["run", "--dataset-root", str(dataset), "--out", str(out), "--modes", "baseline",
                 "--simnet", str(CONFIGS / "simnet.json")]) == EXIT_OK


def test_stage_failure_exit_code(dataset, tmp_path):
    broken = tmp_path / "broken"
    assert main(["make-dataset", "--out", str(broken), "-n", "3"]) == EXIT_OK
    victim = next(p for p in broken.iterdir() if p.is_dir())
    (victim / "B11.bin").write_bytes(b"\0" * 8)
    assert main(["run", "--dataset-root", str(broken), "--out", str(tmp_path / "o")]) == EXIT_STAGE_FAILURE


def test_usage_errors(tmp_path, capsys):
    assert main(["run", "--manifest", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["run", "--out", str(tmp_path), "--modes", "turbo"])
    assert exc.value.code == 2


def test_stats_error_exit_code(tmp_path):
    rec = {"scene_id": "a", "mode": "baseline", "timings": {"total": 1.0}, "specialists_invoked": [],
           "final": None, "label": "none", "scene_area_km2": 1.0, "error": None}
    path = tmp_path / "records.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    assert main(["stats", "--records", str(path)]) == EXIT_STATS


def test_serve_subprocess(dataset):
    proc = subprocess.Popen(
        [sys.executable, "-m", "eohazard", "serve", "--role", "early_warning", "--port", "0",
         "--dataset-root", str(dataset)],
        stdout=subprocess.PIPE, text=True,
    )
    try:
        line = proc.stdout.readline()
        url = line.strip().rsplit(" ", 1)[-1]
        with urllib.request.urlopen(url + "/health", timeout=10) as resp:
            assert json.loads(resp.read())["role"] == "early_warning"
        scene_id = json.loads((dataset / "manifest.json").read_text())["entries"][0]["scene_id"]
        req = urllib.request.Request(url + "/analyze", data=json.dumps({"scene_ref": scene_id}).encode(),
                                     method="POST", headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=10) as resp:
            assert json.loads(resp.read())["scene_id"] == scene_id
    finally:
        proc.terminate()
        assert proc.wait(timeout=10) == 0
