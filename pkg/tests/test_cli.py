import json

import pytest

from lirec.cli import main

SMALL = ["--set", "gen.n_movies=2", "--set", "gen.clips_per_movie=30", "--set",
         "gen.test_movies=1", "--set", "gen.n_interactions=6", "--set", "gen.n_relationships=4",
         "--set", "gen.dim_visual=4", "--set", "gen.dim_dialog=4", "--set", "gen.dim_track=4",
         "--set", "train.model.emb_dim=4", "--set", "train.model.enc_hidden=4",
         "--set", "train.model.head_hidden=4", "--set", "train.batch_size=16"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["generate", "--out", str(out), *SMALL]) == 0
    return out


def test_generate_writes_manifest_and_truth(data):
    assert (data / "manifest.json").exists() and (data / "truth.json").exists()
    run = json.loads((data / "run.json").read_text())
    assert run["command"] == "generate" and run["seed"] == 7
    files = json.loads((data / "run_manifest.json").read_text())["files"]
    assert "manifest.json" in files and "run.json" in files


def test_inspect_dataset(data, capsys):
    assert main(["inspect", str(data)]) == 0
    out = capsys.readouterr().out
    assert "clips         60" in out and "interactions  6" in out


def test_train_eval_inspect_round(data, tmp_path, capsys):
    run = tmp_path / "run"
    args = ["train", "--data", str(data), "--out", str(run), "--regime", "int_char",
            "--weak", "--epochs", "2", "--lr", "0.01", *SMALL]
    assert main(args) == 0
    assert (run / "final.lirc").exists() and (run / "train_log.jsonl").exists()
    rep = tmp_path / "rep" / "report.json"
    assert main(["eval", "--checkpoint", str(run / "final.lirc"), "--data", str(data),
                 "--report", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert {"top1", "char_given_int", "joint_matrix", "random_char"} <= set(d)
    assert (tmp_path / "rep" / "report_confusion.csv").exists()
    capsys.readouterr()
    assert main(["inspect", str(run / "final.lirc")]) == 0
    assert "epoch 2" in capsys.readouterr().out


def test_identical_runs_give_identical_reports(data, tmp_path):
    reps = []
    for name in ("a", "b"):
        run = tmp_path / name
        assert main(["train", "--data", str(data), "--out", str(run), "--regime", "rel",
                     "--epochs", "2", *SMALL]) == 0
        rep = run / "report.json"
        assert main(["eval", "--checkpoint", str(run / "final.lirc"), "--data", str(data),
                     "--report", str(rep)]) == 0
        reps.append((rep.read_bytes(), (run / "final.lirc").read_bytes(),
                     (run / "report_sweep.csv").read_bytes()))
    assert reps[0] == reps[1]


def test_missing_config_is_invalid(tmp_path, capsys):
    assert main(["generate", "--out", str(tmp_path), "--config", str(tmp_path / "c.json")]) == 1
    assert "c.json" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 1


def test_weak_without_pair_regime_is_invalid(data, tmp_path, capsys):
    assert main(["train", "--data", str(data), "--out", str(tmp_path), "--weak",
                 "--regime", "int", *SMALL]) == 1
    assert "weak" in capsys.readouterr().err


def test_missing_dataset_is_invalid(tmp_path):
    assert main(["inspect", str(tmp_path / "nowhere")]) == 1


def test_mismatched_checkpoint_is_invalid(data, tmp_path):
    run = tmp_path / "r"
    assert main(["train", "--data", str(data), "--out", str(run), "--epochs", "0", *SMALL]) == 0
    other = tmp_path / "other"
    assert main(["generate", "--out", str(other), *SMALL, "--set", "gen.n_interactions=7"]) == 0
    assert main(["eval", "--checkpoint", str(run / "final.lirc"), "--data", str(other),
                 "--report", str(tmp_path / "x.json")]) != 0


def test_gradcheck_single_instance(capsys):
    assert main(["gradcheck", "--instances", "1"]) == 0
    out = capsys.readouterr().out
    assert "int_rel_char/weak" in out and "max relative error" in out
