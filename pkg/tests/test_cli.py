from __future__ import annotations

import json

import pytest
import yaml

from monet.cli import main


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_simulate_quantity(capsys):
    assert main(["simulate", "--lambda-p", "100", "--lambda-gold", "4",
                 "--d-lambda-p", "1", "--d-lambda-gold", "1"]) == 0
    out = _json_out(capsys)
    assert out["level"] == 25 and out["label"] == "Conditional(Negative)"


def test_ingest_and_distfit(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert main(["ingest", "--country", "BR", "--synthetic", "--out", str(data)]) == 0
    assert _json_out(capsys)["quarters"] == 108
    assert main(["distfit", "--country", "BR", "--data", str(data), "--variables", "m1",
                 "--format", "markdown"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "| Variable | Distribution | Parameter 1 | Parameter 2 | BIC | Rank |"
    assert len(lines) == 2 + 4


def test_data_dir_env(tmp_path, capsys, monkeypatch):
    main(["ingest", "--country", "US", "--synthetic", "--out", str(tmp_path / "monet_data.csv")])
    capsys.readouterr()
    monkeypatch.setenv("MONET_DATA_DIR", str(tmp_path))
    assert main(["ingest", "--country", "US"]) == 0
    assert _json_out(capsys)["quarters"] == 256


def test_reset_and_ml(tmp_path, capsys):
    assert main(["reset", "--country", "UK", "--synthetic", "--replicates", "200"]) == 0
    rows = _json_out(capsys)
    assert len(rows) == 6 and all(0 <= r["both"] <= 1 for r in rows)
    assert main(["ml", "--country", "UK", "--synthetic", "--kind", "svmradial",
                 "--folds", "2", "--repeats", "1"]) == 0
    assert _json_out(capsys)["kind"] == "SVMRadial"


def test_unknown_country_exit_code(capsys):
    assert main(["ingest", "--country", "XX", "--synthetic"]) == 1
    assert "unknown country" in capsys.readouterr().err


def test_missing_data_is_error(tmp_path, capsys):
    assert main(["ingest", "--country", "US", "--data", str(tmp_path / "nope.csv")]) == 1


def test_run_and_report(tmp_path, capsys):
    cfg = {"country": "BR", "synthetic": True, "seed": 3,
           "sampler": {"chains": 2, "warmup": 150, "draws": 200}, "reset_replicates": 200,
           "ml": {"folds": 2, "repeats": 1, "n_trees": 30,
                  "grids": {"QRF": [{"mtry": 1}], "BRNN": [{"neurons": 1}],
                            "SVMRadial": [{"C": 1.0}], "CForest": [{"mtry": 1}]}},
           "output_dir": str(tmp_path / "out")}
    (tmp_path / "br.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["run", "--config", str(tmp_path / "br.yaml")]) == 0
    js = tmp_path / "out" / "report_BR.json"
    assert js.exists() and (tmp_path / "out" / "csv" / "stages.csv").exists()
    assert (tmp_path / "out" / "markdown" / "metrics__performance.md").exists()
    capsys.readouterr()
    assert main(["report", "--input", str(js), "--format", "csv", "--out", str(tmp_path / "csv2")]) == 0
    assert (tmp_path / "csv2" / "provenance.csv").exists()


def test_run_partial_failure_exit_2(tmp_path):
    cfg = {"country": "US", "data_path": str(tmp_path / "missing.csv"),
           "output_dir": str(tmp_path / "o")}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["run", "--config", str(tmp_path / "c.json"), "--format", "json"]) == 2
