import shutil
import subprocess

import numpy as np
import pytest

from cps_sentinel.cli import infer_schema, main
from cps_sentinel.dataio import DataFormatError

PLANT_INI = """\
[plant]
stages = 1
capacity = 1000
inflow = 2.0
outflow = 1.6
noise_sigma = 0.1
seed = 3

[simulate]
normal_steps = 400
test_steps = 200
test_seed = 4

[attack.1]
category = SSSP
start = 60
duration = 30
targets = 0:level
manipulation = offset:50

[attack.2]
category = SSSP
start = 140
duration = 20
targets = 0:flow
manipulation = offset:40
"""


def train_ini(data_dir, tmp_path, detector="threshold", epochs=2):
    return f"""\
[paths]
train_csv = {data_dir}/normal.csv
artifact = {tmp_path}/model.npz
history_csv = {tmp_path}/history.csv

[forecaster]
window = 8
conv1 = 8
conv2 = 8
dense1 = 8
dense2 = 8
dropout = 0.0
learning_rate = 0.01
epochs = {epochs}
batch_size = 32
patience = 2

[detector]
kind = {detector}
beta = 1.2

[seeds]
pipeline = 7
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """simulate + train once; the artifacts feed several tests."""
    tmp_path = tmp_path_factory.mktemp("cli")
    plant_cfg = tmp_path / "plant.ini"
    plant_cfg.write_text(PLANT_INI)
    data_dir = tmp_path / "data"
    assert main(["simulate", "--config", str(plant_cfg), "--out", str(data_dir)]) == 0

    train_cfg = tmp_path / "train.ini"
    train_cfg.write_text(train_ini(data_dir, tmp_path))
    assert main(["train", "--config", str(train_cfg)]) == 0
    return tmp_path


def test_usage_errors_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["detect", "--model", "m.npz"]) == 1  # missing required args
    err = capsys.readouterr().err
    assert err.startswith("cps-sentinel: ")


def test_missing_config_exits_2(capsys):
    assert main(["train", "--config", "/nonexistent/train.ini"]) == 2
    assert "cps-sentinel: " in capsys.readouterr().err


def test_config_without_paths_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bare.ini"
    cfg.write_text("[forecaster]\nwindow = 8\n")
    assert main(["train", "--config", str(cfg)]) == 2
    assert "[paths]" in capsys.readouterr().err


def test_simulate_writes_both_frames(workspace):
    normal = (workspace / "data" / "normal.csv").read_text().splitlines()
    test = (workspace / "data" / "test.csv").read_text().splitlines()
    assert len(normal) == 401 and len(test) == 201
    assert normal[0] == "Timestamp,S1_LEVEL,S1_FLOW,S1_VALVE,S1_PUMP,Normal/Attack"
    assert all(line.endswith(",Normal") for line in normal[1:])
    attacked = [line for line in test[1:] if line.endswith(",Attack")]
    assert len(attacked) == 50


def test_train_writes_artifact_and_history(workspace):
    assert (workspace / "model.npz").exists()
    history = (workspace / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_mae,val_mae"
    assert len(history) >= 2


def test_detect_then_evaluate_round_trip(workspace, capsys):
    out = workspace / "verdicts"
    code = main([
        "detect", "--model", str(workspace / "model.npz"),
        "--data", str(workspace / "data" / "test.csv"), "--out", str(out),
    ])
    assert code == 0
    verdicts = (out / "verdicts.csv").read_text().splitlines()
    assert verdicts[0] == "index,flag,score"
    assert len(verdicts) == 1 + (200 - 8)
    errors = (out / "errors.csv").read_text().splitlines()
    assert errors[0] == "index,error" and len(errors) == len(verdicts)
    capsys.readouterr()

    code = main([
        "evaluate", "--verdicts", str(out / "verdicts.csv"),
        "--labels", str(workspace / "data" / "test.csv"),
    ])
    assert code == 0
    report = capsys.readouterr().out
    lines = dict(line.split(" ") for line in report.strip().splitlines())
    assert set(lines) == {"tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f1"}
    assert int(lines["tp"]) + int(lines["fp"]) + int(lines["tn"]) + int(lines["fn"]) == 192


def test_detect_is_byte_deterministic(workspace):
    out_a = workspace / "rerun_a"
    out_b = workspace / "rerun_b"
    for out in (out_a, out_b):
        assert main([
            "detect", "--model", str(workspace / "model.npz"),
            "--data", str(workspace / "data" / "test.csv"), "--out", str(out),
        ]) == 0
    assert (out_a / "verdicts.csv").read_bytes() == (out_b / "verdicts.csv").read_bytes()
    assert (out_a / "errors.csv").read_bytes() == (out_b / "errors.csv").read_bytes()


def test_detect_rejects_mismatched_schema(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("Timestamp,X1,Normal/Attack\n0,1.0,Normal\n")
    code = main([
        "detect", "--model", str(workspace / "model.npz"),
        "--data", str(bad), "--out", str(tmp_path / "out"),
    ])
    assert code == 2
    assert "header" in capsys.readouterr().err


def test_evaluate_verdicts_against_themselves(tmp_path, capsys):
    path = tmp_path / "v.csv"
    path.write_text("index,flag,score\n0,0,0.1\n1,1,2.0\n2,1,3.0\n3,0,0.2\n")
    assert main(["evaluate", "--verdicts", str(path), "--labels", str(path)]) == 0
    lines = dict(line.split(" ") for line in capsys.readouterr().out.strip().splitlines())
    assert lines["f1"] == "1.0" and lines["accuracy"] == "1.0"
    assert lines["tp"] == "2" and lines["tn"] == "2"


def test_evaluate_missing_label_index_exits_2(tmp_path, capsys):
    verdicts = tmp_path / "v.csv"
    verdicts.write_text("index,flag,score\n999,1,1.0\n")
    labels = tmp_path / "l.csv"
    labels.write_text("index,flag,score\n0,1,1.0\n")
    assert main(["evaluate", "--verdicts", str(verdicts), "--labels", str(labels)]) == 2
    assert "no entry for index 999" in capsys.readouterr().err


def test_evaluate_rejects_non_verdict_file(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["evaluate", "--verdicts", str(bad), "--labels", str(bad)]) == 2
    assert "not a verdict file" in capsys.readouterr().err


def test_report_round_trips_error_series(workspace):
    detect_out = workspace / "verdicts"
    report_out = workspace / "report"
    code = main([
        "report", "--errors", str(detect_out / "errors.csv"),
        "--lag", "2", "--out", str(report_out),
    ])
    assert code == 0
    # The echoed series is byte-identical to the input: repr round-trips.
    assert (report_out / "error_series.csv").read_bytes() == (
        detect_out / "errors.csv"
    ).read_bytes()
    embedding = (report_out / "embedding.csv").read_text().splitlines()
    assert embedding[0] == "index,e_t,e_lag,weight,synthetic"
    assert len(embedding) == 1 + (192 - 2)


def test_report_rejects_malformed_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("index,error\n0,1.0\noops\n")
    assert main(["report", "--errors", str(bad), "--out", str(tmp_path / "r")]) == 2
    assert "malformed error row" in capsys.readouterr().err


def test_optimize_micro_run(workspace, tmp_path, capsys):
    cfg = tmp_path / "ga.ini"
    cfg.write_text(f"""\
[paths]
train_csv = {workspace}/data/normal.csv
validation_csv = {workspace}/data/test.csv
artifact = {tmp_path}/best.npz
evolution_log = {tmp_path}/evolution.log
ga_history_csv = {tmp_path}/ga_history.csv

[forecaster]
epochs = 2
batch_size = 32
patience = 2

[ga]
population_size = 3
generations = 1
tournament_size = 2
crossover_rate = 0.5
mutation_rate = 0.2
elitism_count = 1
seed = 2
budget_epochs = 1
threads = 1
""")
    assert main(["optimize", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "best genome " in out and "fitness" in out
    assert (tmp_path / "best.npz").exists()
    log_lines = (tmp_path / "evolution.log").read_text().strip().splitlines()
    assert len(log_lines) == 2 * 3  # (generations + 1) * population
    history = (tmp_path / "ga_history.csv").read_text().splitlines()
    assert history[0] == "generation,best,mean" and len(history) == 3


def test_infer_schema_reads_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("Timestamp,A,B,Normal/Attack\n0,1,2,Normal\n")
    schema = infer_schema(str(path))
    assert schema.names == ("A", "B")
    assert all(kind == "sensor" for kind in schema.kinds)
    unlabeled = tmp_path / "u.csv"
    unlabeled.write_text("Timestamp,A\n0,1\n")
    assert infer_schema(str(unlabeled)).names == ("A",)
    bad = tmp_path / "bad.csv"
    bad.write_text("Time,A\n0,1\n")
    with pytest.raises(DataFormatError, match="header"):
        infer_schema(str(bad))


def test_console_script_is_installed():
    exe = shutil.which("cps-sentinel")
    assert exe, "console script missing; install with pip install -e ."
    proc = subprocess.run([exe], capture_output=True, text=True)
    assert proc.returncode == 1
    assert proc.stderr.startswith("cps-sentinel: ")
