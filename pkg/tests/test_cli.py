from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import pytest

import cli
from offloader.data import load_traces


@pytest.fixture
def config_file(tmp_path, small_run_config):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(small_run_config.to_dict()), encoding="utf-8")
    return path


@pytest.fixture
def out_dir(small_run_config):
    return Path(small_run_config.out_dir)


def run(config_file, *args):
    return cli.main([*args, "--config", str(config_file)])


def test_gen_writes_both_splits(config_file, out_dir):
    assert run(config_file, "gen") == cli.EXIT_OK

    train = load_traces(out_dir / "traces" / "train.jsonl")
    test = load_traces(out_dir / "traces" / "test.jsonl")
    assert len(train) == 6 and len(test) == 4
    assert {t.horizon for t in train + test} == {12}
    assert not {t.trace_id for t in train} & {t.trace_id for t in test}


def test_gen_single_split(config_file, out_dir):
    assert run(config_file, "gen", "--split", "test") == cli.EXIT_OK
    assert (out_dir / "traces" / "test.jsonl").exists()
    assert not (out_dir / "traces" / "train.jsonl").exists()


def test_gen_is_reproducible(config_file, out_dir):
    run(config_file, "gen")
    first = (out_dir / "traces" / "test.jsonl").read_bytes()
    run(config_file, "gen")
    assert (out_dir / "traces" / "test.jsonl").read_bytes() == first


def test_calibrate_then_bench(config_file, out_dir, capsys):
    assert run(config_file, "gen") == cli.EXIT_OK
    assert run(config_file, "calibrate") == cli.EXIT_OK

    calibration = json.loads((out_dir / "calibration.json").read_text(encoding="utf-8"))
    assert set(calibration["thresholds"]) == {"25", "75"}
    assert calibration["thresholds"]["25"] <= calibration["thresholds"]["75"]

    assert run(config_file, "bench") == cli.EXIT_OK
    report = out_dir / "report"
    for name in ("rewards.csv", "summary.csv", "ratios.csv", "action_mix.csv", "threshold_sweep.csv", "README.md"):
        assert (report / name).exists()

    rewards = pd.read_csv(report / "rewards.csv")
    assert set(rewards["policy"]) == {"random", "all-robot", "all-cloud", "robot-heuristic", "Oracle"}
    assert len(rewards) == 5 * 4 * 2 * 2
    assert "robot-heuristic uses q=" in capsys.readouterr().out


def test_bench_calibrates_on_the_fly(config_file, out_dir):
    run(config_file, "gen")
    assert run(config_file, "bench") == cli.EXIT_OK
    assert (out_dir / "report" / "threshold_sweep.csv").exists()


def test_bench_without_traces_is_a_usage_error(config_file, out_dir, capsys):
    assert run(config_file, "bench") == cli.EXIT_USAGE
    assert "test.jsonl" in capsys.readouterr().err
    assert not (out_dir / "report").exists()


@pytest.mark.parametrize(
    "content",
    [b"\xff\xfe\n", b'{"type": "trace", "id": "x", "T": "eighty", "seed": 1}\n'],
)
def test_bench_on_a_corrupt_trace_file_fails_cleanly(config_file, out_dir, capsys, content):
    traces = out_dir / "traces"
    traces.mkdir(parents=True)
    (traces / "test.jsonl").write_bytes(content)

    assert run(config_file, "bench") == cli.EXIT_RUNTIME
    assert "line 1" in capsys.readouterr().err
    assert not (out_dir / "report").exists()


def test_calibrate_without_traces_is_a_usage_error(config_file):
    assert run(config_file, "calibrate") == cli.EXIT_USAGE


def test_overlapping_seed_ranges_write_nothing(tmp_path, small_run_config, capsys):
    small_run_config.bench.test_seed_base = small_run_config.bench.train_seed_base + 2
    path = tmp_path / "overlap.json"
    path.write_text(json.dumps(small_run_config.to_dict()), encoding="utf-8")

    assert run(path, "gen") == cli.EXIT_USAGE
    assert "overlaps" in capsys.readouterr().err
    assert not (tmp_path / "run").exists()


def test_missing_config_file(tmp_path):
    assert cli.main(["gen", "--config", str(tmp_path / "absent.toml")]) == cli.EXIT_USAGE


def test_malformed_config_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert cli.main(["gen", "--config", str(path)]) == cli.EXIT_USAGE


def test_bad_arguments_exit_with_usage_code():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["teleport"])
    assert excinfo.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["gen", "--split", "validation"])
    assert excinfo.value.code == cli.EXIT_USAGE


def test_oracle_check_reports_matches(config_file, capsys):
    assert run(config_file, "oracle-check") == cli.EXIT_OK
    assert "20/20 match" in capsys.readouterr().out


def test_flags_override_the_config(config_file, tmp_path):
    other = tmp_path / "elsewhere"
    assert run(config_file, "gen", "--split", "train", "--out", str(other)) == cli.EXIT_OK
    assert (other / "traces" / "train.jsonl").exists()


def test_train_then_bench_with_checkpoint(config_file, out_dir, capsys):
    assert run(config_file, "gen") == cli.EXIT_OK
    assert run(config_file, "train") == cli.EXIT_OK

    checkpoint = out_dir / "checkpoint.npz"
    curve = pd.read_csv(out_dir / "training_curve.csv")
    assert checkpoint.exists()
    assert curve["episode"].tolist() == [10, 20]
    assert "Episodes        : 20" in capsys.readouterr().out

    assert run(config_file, "bench", "--checkpoint", str(checkpoint)) == cli.EXIT_OK
    rewards = pd.read_csv(out_dir / "report" / "rewards.csv")
    assert "RL" in set(rewards["policy"])


def test_train_resumes_from_checkpoint(config_file, out_dir, capsys):
    assert run(config_file, "train", "--episodes", "10") == cli.EXIT_OK
    checkpoint = out_dir / "checkpoint.npz"
    resumed = out_dir / "resumed.npz"
    resumed.write_bytes(checkpoint.read_bytes())

    assert run(config_file, "train", "--checkpoint", str(resumed)) == cli.EXIT_OK
    assert "Resuming from" in capsys.readouterr().out
    assert pd.read_csv(out_dir / "training_curve.csv")["episode"].tolist() == [10, 20]
