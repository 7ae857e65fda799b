"""End-to-end tests for the command-line interface and its exit-code contract."""

import os
import subprocess

import pytest
import torch

from stressfield.cli import main
from stressfield.dataset import (
    DESK_EDGE_LENGTH,
    fit_normalization,
    normalization_to_manifest,
    read_manifest,
    simulate_sample,
    write_container,
)
from stressfield.models import ModelConfig, build_model, load_checkpoint, save_checkpoint
from stressfield.report import CSV_HEADER
from stressfield.training import parse_report

COMBOS = [(1, 0, 1), (1, 0, 2), (1, 0, 9), (2, 0, 1), (2, 0, 2)]


@pytest.fixture(scope="module")
def container(tmp_path_factory):
    """A five-sample container; the cyclic split gives 3 train / 1 val / 1 test."""
    root = tmp_path_factory.mktemp("cli_data")
    path = str(root / "mini.spnd")
    samples = [
        simulate_sample(g, b, l, rng_seed=42, target_edge_length=DESK_EDGE_LENGTH)
        for g, b, l in COMBOS
    ]
    norm = fit_normalization(s.stress for s in samples)
    manifest = {
        "split_preset": "baseline",
        "sample_count": str(len(samples)),
        **normalization_to_manifest(norm),
    }
    write_container(path, samples, manifest)
    return path


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    """An initialized (untrained) model checkpoint."""
    path = str(tmp_path_factory.mktemp("cli_ckpt") / "init.ckpt")
    model = build_model(ModelConfig(variant="Spatiotempo-LSTM", d=8), seed=0)
    save_checkpoint(path, model, seed=0)
    return path


class TestExitCodes:
    def test_unknown_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_bad_choice_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--out", str(tmp_path / "x.spnd"), "--scale", "bogus"])
        assert exc.value.code == 2

    def test_missing_data_file_exits_2(self, tmp_path):
        assert main(["train", "--data", "/no/such/file.spnd", "--out", str(tmp_path)]) == 2

    def test_generate_to_missing_directory_exits_2(self):
        assert main(["generate", "--out", "/no/such/dir/out.spnd"]) == 2

    def test_malformed_weights_exit_2(self, container, tmp_path):
        code = main(
            ["train", "--data", container, "--weights", "1,2", "--out", str(tmp_path)]
        )
        assert code == 2

    def test_eval_without_ckpt_or_oracle_exits_2(self, container, tmp_path):
        code = main(
            ["eval", "--data", container, "--out", str(tmp_path / "r.txt")]
        )
        assert code == 2

    def test_diverged_training_is_internal_error(self, container, tmp_path):
        code = main(
            [
                "train", "--data", container, "--weights", "1,0,0", "--epochs", "2",
                "--d", "8", "--lr", "1e30", "--out", str(tmp_path / "run"),
            ]
        )
        assert code == 1


class TestInspect:
    def test_round_trips_manifest(self, container, capsys):
        assert main(["inspect", "--data", container]) == 0
        printed = {}
        for line in capsys.readouterr().out.splitlines():
            key, _, value = line.partition("=")
            printed[key] = value
        assert printed == read_manifest(container)

    def test_console_script_is_installed(self, container):
        proc = subprocess.run(
            ["stressfield", "inspect", "--data", container],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0
        assert "split_preset=baseline" in proc.stdout


class TestTrain:
    def test_epochs_zero_writes_initialized_checkpoint(self, container, tmp_path):
        out = str(tmp_path / "run")
        code = main(
            [
                "train", "--data", container, "--weights", "1,0,0", "--epochs", "0",
                "--d", "8", "--out", out,
            ]
        )
        assert code == 0
        model, config, _ = load_checkpoint(os.path.join(out, "last.ckpt"))
        reference = build_model(ModelConfig(variant="Spatiotempo-LSTM", d=8), seed=0)
        for (name, got), (_, want) in zip(
            model.state_dict().items(), reference.state_dict().items()
        ):
            assert torch.equal(got, want), name

    def test_mae_only_run_writes_log_and_curves(self, container, tmp_path, capsys):
        out = str(tmp_path / "run")
        code = main(
            [
                "train", "--data", container, "--weights", "1,0,0", "--epochs", "2",
                "--d", "8", "--out", out,
            ]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "weights: 1.0,0.0,0.0" in stdout
        log_lines = open(os.path.join(out, "train.log")).read().splitlines()
        assert len(log_lines) == 4  # one train and one val line per epoch
        for name in ("best.ckpt", "last.ckpt", "resume.pt", "loss_curves.png"):
            assert os.path.isfile(os.path.join(out, name)), name


class TestEval:
    def test_oracle_reports_zero_error(self, container, tmp_path, capsys):
        report_path = str(tmp_path / "report.txt")
        code = main(
            ["eval", "--data", container, "--oracle", "--out", report_path]
        )
        assert code == 0
        text = open(report_path).read()
        assert text == capsys.readouterr().out
        report = parse_report(text)
        assert report.part == "test"
        assert all(v == 0.0 for v in report.mrpe.values())
        baseline_line = [l for l in text.splitlines() if l.startswith("zero_baseline")]
        assert len(baseline_line) == 1
        assert float(baseline_line[0].partition("=")[2]) > 0.0

    def test_checkpoint_eval_writes_parsable_report(self, container, checkpoint, tmp_path):
        report_path = str(tmp_path / "report.txt")
        code = main(
            [
                "eval", "--data", container, "--ckpt", checkpoint,
                "--split", "val", "--out", report_path,
            ]
        )
        assert code == 0
        report = parse_report(open(report_path).read())
        assert report.part == "val"
        assert report.n_samples == 1
        assert all(v > 0.0 for v in report.mrpe.values())


class TestPredict:
    def test_writes_prediction_csv(self, container, checkpoint, tmp_path):
        out = str(tmp_path / "pred.csv")
        code = main(
            [
                "predict", "--data", container, "--ckpt", checkpoint,
                "--sample", "4", "--out", out,
            ]
        )
        assert code == 0
        lines = open(out).read().splitlines()
        assert lines[0] == CSV_HEADER
        n_nodes = simulate_sample(
            *COMBOS[4], rng_seed=42, target_edge_length=DESK_EDGE_LENGTH
        ).stress.shape[0]
        assert len(lines) == 1 + n_nodes * 100

    def test_sample_out_of_range_exits_2(self, container, checkpoint, tmp_path):
        code = main(
            [
                "predict", "--data", container, "--ckpt", checkpoint,
                "--sample", "7", "--out", str(tmp_path / "pred.csv"),
            ]
        )
        assert code == 2


class TestRender:
    def test_truth_only_render(self, container, tmp_path, capsys):
        out_dir = str(tmp_path / "maps")
        code = main(
            [
                "render", "--data", container, "--sample", "0", "--frame", "10",
                "--grid", "64", "--out-dir", out_dir,
            ]
        )
        assert code == 0
        printed = capsys.readouterr().out.splitlines()
        assert printed and all(os.path.isfile(p) for p in printed)
        names = [os.path.basename(p) for p in printed]
        assert sum(n.endswith(".bmp") for n in names) == 4
        assert sum(n.endswith(".csv") for n in names) == 1
        assert sum(n.endswith(".png") for n in names) == 1

    def test_render_with_checkpoint_adds_predictions(
        self, container, checkpoint, tmp_path, capsys
    ):
        out_dir = str(tmp_path / "maps")
        code = main(
            [
                "render", "--data", container, "--sample", "0", "--frame", "10",
                "--ckpt", checkpoint, "--grid", "64", "--out-dir", out_dir,
            ]
        )
        assert code == 0
        names = [os.path.basename(p) for p in capsys.readouterr().out.splitlines()]
        assert sum(n.endswith(".bmp") for n in names) == 8
        assert sum(n.endswith(".csv") for n in names) == 2

    def test_frame_out_of_range_exits_2(self, container, tmp_path):
        code = main(
            [
                "render", "--data", container, "--sample", "0", "--frame", "100",
                "--grid", "64", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 2

    def test_repeat_render_is_byte_identical(self, container, tmp_path, capsys):
        args = ["render", "--data", container, "--sample", "1", "--frame", "25", "--grid", "64"]
        assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
        first = capsys.readouterr().out.splitlines()
        assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
        second = capsys.readouterr().out.splitlines()
        for pa, pb in zip(first, second):
            assert open(pa, "rb").read() == open(pb, "rb").read(), os.path.basename(pa)


class TestThreadCap:
    def test_env_var_caps_torch_threads(self, container, monkeypatch):
        monkeypatch.setenv("STRESSFIELD_THREADS", "1")
        assert main(["inspect", "--data", container]) == 0
        assert torch.get_num_threads() == 1

    def test_non_integer_env_var_exits_2(self, container, monkeypatch):
        monkeypatch.setenv("STRESSFIELD_THREADS", "many")
        assert main(["inspect", "--data", container]) == 2

    def test_nonpositive_env_var_exits_2(self, container, monkeypatch):
        monkeypatch.setenv("STRESSFIELD_THREADS", "0")
        assert main(["inspect", "--data", container]) == 2
