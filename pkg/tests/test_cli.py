import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from triplab.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_PARTIAL, main
from triplab.experiments import simulate_human_study
from triplab.signals import generate_signal, load_signal, save_signal
from triplab.triplets import LogisticLink


def write_config(path, out_dir, extra=""):
    path.write_text(
        f"""
[run]
seed = 0
trials = 2
output_dir = "{out_dir}"

[signal]
kind = "task-b-like"
n = 30
seed = 1

[noise]
model = "logistic"
sigma = 20.0

[budgets]
fractions = [0.02]

[solver]
losses = ["ste"]
restarts = 2
max_iters = 200
{extra}
"""
    )


@pytest.fixture()
def study(tmp_path):
    signal = generate_signal("task-b-like", 30, seed=1)
    sig_path = tmp_path / "signal.csv"
    save_signal(signal, sig_path)
    labels_path = tmp_path / "labels.jsonl"
    simulate_human_study(
        signal, 3, 400, LogisticLink(sigma=20.0), seed=4, output_path=labels_path
    )
    return sig_path, labels_path


class TestSimulateVerb:
    def test_runs_and_writes(self, tmp_path, capsys):
        config = tmp_path / "exp.toml"
        write_config(config, tmp_path / "out")
        code = main(["simulate", "--config", str(config), "--quiet"])
        assert code == EXIT_OK
        assert (tmp_path / "out" / "records.csv").exists()
        assert "2 cells" in capsys.readouterr().out

    def test_seed_and_out_overrides(self, tmp_path):
        config = tmp_path / "exp.toml"
        write_config(config, tmp_path / "ignored")
        code = main(
            [
                "simulate",
                "--config",
                str(config),
                "--seed",
                "5",
                "--out",
                str(tmp_path / "real"),
                "--quiet",
            ]
        )
        assert code == EXIT_OK
        rows = list(csv.DictReader(open(tmp_path / "real" / "records.csv")))
        assert not (tmp_path / "ignored").exists()
        assert rows and all(r["config_hash"] == rows[0]["config_hash"] for r in rows)

    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "no.toml")]) == EXIT_CONFIG

    def test_bad_config_is_config_error(self, tmp_path):
        config = tmp_path / "exp.toml"
        config.write_text("[signal]\nkind = 'nope'\nn = 30\n")
        assert main(["simulate", "--config", str(config)]) == EXIT_CONFIG

    def test_partial_failure_exit(self, tmp_path):
        config = tmp_path / "exp.toml"
        write_config(config, tmp_path / "out", extra="init_scale = 1e200\n")
        code = main(["simulate", "--config", str(config), "--quiet"])
        assert code == EXIT_PARTIAL

    def test_resume_flag(self, tmp_path, capsys):
        config = tmp_path / "exp.toml"
        write_config(config, tmp_path / "out")
        main(["simulate", "--config", str(config), "--quiet"])
        capsys.readouterr()
        code = main(["simulate", "--config", str(config), "--quiet", "--resume"])
        assert code == EXIT_OK
        assert "(0 computed" in capsys.readouterr().out


class TestFuseVerb:
    def test_fuse_with_signal(self, tmp_path, study, capsys):
        sig_path, labels_path = study
        code = main(
            [
                "fuse",
                "--labels",
                str(labels_path),
                "--out",
                str(tmp_path / "out"),
                "--signal",
                str(sig_path),
                "--restarts",
                "2",
                "--max-iters",
                "300",
            ]
        )
        assert code == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["annotators"] == 3
        assert summary["rho"] > 0.9
        assert (tmp_path / "out" / "embedding.csv").exists()

    def test_conflict_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(
            '{"i":1,"j":2,"k":3,"w":-1,"annotator":"a"}\n'
            '{"i":1,"j":2,"k":3,"w":1,"annotator":"b"}\n'
        )
        code = main(["fuse", "--labels", str(bad), "--out", str(tmp_path / "out"), "--n", "4"])
        assert code == EXIT_DATA
        assert "data error" in capsys.readouterr().err

    def test_malformed_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("garbage\n")
        assert (
            main(["fuse", "--labels", str(bad), "--out", str(tmp_path / "out")])
            == EXIT_DATA
        )

    def test_missing_file_is_data_error(self, tmp_path):
        assert (
            main(["fuse", "--labels", str(tmp_path / "no.jsonl"), "--out", str(tmp_path / "o")])
            == EXIT_DATA
        )


class TestEvaluateVerb:
    def test_metrics_json(self, tmp_path, study, capsys):
        sig_path, labels_path = study
        main(
            [
                "fuse",
                "--labels",
                str(labels_path),
                "--out",
                str(tmp_path / "out"),
                "--restarts",
                "2",
                "--max-iters",
                "300",
            ]
        )
        capsys.readouterr()
        code = main(
            [
                "evaluate",
                "--embedding",
                str(tmp_path / "out" / "embedding.csv"),
                "--signal",
                str(sig_path),
                "--labels",
                str(labels_path),
            ]
        )
        assert code == EXIT_OK
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["n"] == 30
        assert metrics["rho"] > 0.9
        assert 0.0 <= metrics["tau_v"] < 0.5
        signal = load_signal(sig_path)
        assert metrics["mse_over_var"] == pytest.approx(
            metrics["mse"] / float(np.var(signal.values))
        )

    def test_out_file(self, tmp_path, study, capsys):
        sig_path, labels_path = study
        main(
            [
                "fuse",
                "--labels",
                str(labels_path),
                "--out",
                str(tmp_path / "out"),
                "--restarts",
                "1",
                "--max-iters",
                "100",
            ]
        )
        capsys.readouterr()
        metrics_path = tmp_path / "metrics.json"
        code = main(
            [
                "evaluate",
                "--embedding",
                str(tmp_path / "out" / "embedding.csv"),
                "--signal",
                str(sig_path),
                "--out",
                str(metrics_path),
            ]
        )
        assert code == EXIT_OK
        assert json.loads(metrics_path.read_text())["n"] == 30

    def test_needs_signal_or_labels(self, tmp_path, study):
        _, labels_path = study
        code = main(["evaluate", "--embedding", str(tmp_path / "missing.csv")])
        assert code == EXIT_CONFIG


class TestPlotDataVerb:
    def test_emits_files(self, tmp_path, capsys):
        config = tmp_path / "exp.toml"
        write_config(config, tmp_path / "out")
        main(["simulate", "--config", str(config), "--quiet"])
        capsys.readouterr()
        code = main(
            [
                "plot-data",
                "--records",
                str(tmp_path / "out" / "records.csv"),
                "--out",
                str(tmp_path / "plots"),
            ]
        )
        assert code == EXIT_OK
        printed = capsys.readouterr().out.splitlines()
        assert len(printed) == 3
        for path in printed:
            assert os.path.exists(path)

    def test_missing_records_is_data_error(self, tmp_path):
        code = main(
            ["plot-data", "--records", str(tmp_path / "no.csv"), "--out", str(tmp_path)]
        )
        assert code == EXIT_DATA


class TestEntryPoint:
    def test_module_invocation(self):
        out = subprocess.run(
            [sys.executable, "-m", "triplab.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0
        for verb in ("simulate", "fuse", "evaluate", "plot-data", "serve"):
            assert verb in out.stdout

    def test_installed_script(self):
        out = subprocess.run(["triplab", "--help"], capture_output=True, text=True)
        assert out.returncode == 0
