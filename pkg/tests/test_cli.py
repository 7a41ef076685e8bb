"""CLI pipeline: determinism, artifact layout, config-file precedence, errors."""

import json
from pathlib import Path

import pytest

from veto_bandit.cli import main


@pytest.fixture(scope="module")
def sim_log(tmp_path_factory):
    path = tmp_path_factory.mktemp("logs") / "matches.jsonl"
    code = main([
        "simulate", "--teams", "8", "--matches", "400", "--seed", "1",
        "--permaban-fraction", "0.0", "--output", str(path),
    ])
    assert code == 0
    return path


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main([
            "simulate", "--teams", "6", "--matches", "50", "--seed", "9",
            "--output", str(out),
        ]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_seed_changes_output(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["simulate", "--teams", "6", "--matches", "50", "--seed", "1", "--output", str(a)])
    main(["simulate", "--teams", "6", "--matches", "50", "--seed", "2", "--output", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_ingest_writes_dataset_and_report(sim_log, tmp_path):
    out = tmp_path / "ingest"
    assert main(["ingest", "--input", str(sim_log), "--output", str(out)]) == 0
    lines = (out / "decisions.csv").read_text().splitlines()
    report = json.loads((out / "filter_report.json").read_text())
    assert lines[0].startswith("c0,c1")
    assert len(lines) - 1 == report["retained_matches"] * 6
    config = json.loads((out / "config.json").read_text())
    assert config["command"] == "ingest"
    assert str(sim_log) in config["inputs"]
    assert len(config["inputs"][str(sim_log)]) == 64  # sha256 hex


def test_train_writes_model_and_checkpoints(sim_log, tmp_path):
    out = tmp_path / "train"
    assert main([
        "train", "--input", str(sim_log), "--output", str(out),
        "--variant", "combo", "--reward", "mor", "--lr", "0.05", "--epochs", "2",
    ]) == 0
    model = json.loads((out / "model.json").read_text())
    assert model["variant"] == "combo"
    assert model["config"]["reward_kind"] == "mor"
    assert model["config_hash"]
    lines = (out / "checkpoints.csv").read_text().splitlines()
    assert lines[0] == "decision_index,pick_value,ban_value"
    # one row per 100 decisions over 2 epochs of the train split
    n_rows = len(lines) - 1
    train_decisions = model["update_counts"]["records_seen"]
    assert n_rows == train_decisions // 100


def test_evaluate_writes_full_grid_and_is_deterministic(sim_log, tmp_path):
    out_a, out_b = tmp_path / "eval_a", tmp_path / "eval_b"
    args = [
        "evaluate", "--input", str(sim_log), "--lr", "0.05", "--epochs", "1",
    ]
    assert main(args + ["--output", str(out_a)]) == 0
    assert main(args + ["--output", str(out_b)]) == 0
    grid_a = (out_a / "grid.csv").read_bytes()
    grid_b = (out_b / "grid.csv").read_bytes()
    assert grid_a == grid_b
    assert (out_a / "grid.txt").read_bytes() == (out_b / "grid.txt").read_bytes()
    text = (out_a / "grid.txt").read_text()
    for label in ("Uniform policy", "Logging policy", "SplitBandit", "ComboBandit", "EpisodicBandit"):
        assert label in text
    rows = (out_a / "grid.csv").read_text().splitlines()
    assert len(rows) == 41


def test_recommend_prints_sorted_distribution(sim_log, tmp_path, capsys):
    out = tmp_path / "model"
    main([
        "train", "--input", str(sim_log), "--output", str(out),
        "--variant", "combo", "--lr", "0.05", "--epochs", "1",
    ])
    capsys.readouterr()
    code = main([
        "recommend", "--model", str(out / "model.json"), "--input", str(sim_log),
        "--team-a", "team000", "--team-b", "team001",
        "--decisions", "team000:ban:nuke,team001:ban:dust2,team000:pick:mirage",
    ])
    assert code == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed[0].startswith("step 3: pick by team001")
    probs = [float(line.split()[-1]) for line in printed[1:]]
    assert len(probs) == 4  # step 3 leaves four legal maps
    assert probs == sorted(probs, reverse=True)
    assert sum(probs) == pytest.approx(1.0, abs=2e-3)  # printed at 3 decimals


def test_config_file_defaults_and_flag_override(sim_log, tmp_path, monkeypatch):
    config_path = tmp_path / "defaults.json"
    config_path.write_text(json.dumps({"lr": 0.2, "epochs": 1}))
    out = tmp_path / "train_cfg"
    assert main([
        "--config", str(config_path),
        "train", "--input", str(sim_log), "--output", str(out),
        "--epochs", "2",  # explicit flag beats the file
    ]) == 0
    model = json.loads((out / "model.json").read_text())
    assert model["config"]["learning_rate"] == 0.2  # from file
    assert model["config"]["epochs"] == 2  # flag wins

    monkeypatch.setenv("VETO_BANDIT_CONFIG", str(config_path))
    out_env = tmp_path / "train_env"
    assert main(["train", "--input", str(sim_log), "--output", str(out_env)]) == 0
    model_env = json.loads((out_env / "model.json").read_text())
    assert model_env["config"]["learning_rate"] == 0.2


def test_missing_input_is_single_error_line(tmp_path, capsys):
    code = main(["ingest", "--input", str(tmp_path / "nope.jsonl"), "--output", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert err[0].startswith("error: ")
    payload = json.loads(err[0].removeprefix("error: "))
    assert payload["code"] and payload["message"]


def test_recommend_illegal_decision_fails_cleanly(sim_log, tmp_path, capsys):
    out = tmp_path / "model"
    main([
        "train", "--input", str(sim_log), "--output", str(out),
        "--variant", "split", "--lr", "0.05", "--epochs", "1",
    ])
    capsys.readouterr()
    code = main([
        "recommend", "--model", str(out / "model.json"), "--input", str(sim_log),
        "--team-a", "team000", "--team-b", "team001",
        "--decisions", "team001:ban:nuke",  # wrong team first
    ])
    assert code == 1
    err = capsys.readouterr().err
    assert "error: " in err
