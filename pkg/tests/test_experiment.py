# FILE: tests/test_experiment.py
# ============================================================================
import json

import numpy as np
import pandas as pd
import pytest

from app.cli import main
from app.exceptions import FrameError, InvalidArgumentError, SolverError
from app.schemas.experiment import ExperimentConfig, RunSummary
from app.schemas.params import SystemParams
from app.services import trainer as trainer_module
from app.services.experiment import (
    METRIC_COLUMNS,
    compare_runs,
    load_summary,
    moving_average,
    run_experiment,
    run_matrix,
)


def small_config(tmp_path, name="run", **kwargs):
    kwargs.setdefault("devices", 3)
    kwargs.setdefault("frames", 25)
    kwargs.setdefault("algo", "dnn-ugq")
    kwargs.setdefault("record_timing", False)
    return ExperimentConfig(out_dir=str(tmp_path / name), **kwargs)


def write_summary(directory, run_id, rate):
    directory.mkdir(parents=True)
    summary = RunSummary(run_id=run_id, algo="dnn-op", devices=3, frames=10, seed=0, candidates=3,
                         reference="auto", average_normalized_rate=rate)
    (directory / "summary.json").write_text(summary.model_dump_json())


class TestMovingAverage:
    def test_trailing_window(self):
        assert np.allclose(moving_average([1, 2, 3, 4], 2), [1.0, 1.5, 2.5, 3.5])

    def test_window_longer_than_series(self):
        assert np.allclose(moving_average([2, 4], 10), [2.0, 3.0])

    def test_window_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            moving_average([1.0], 0)


class TestExperimentConfig:
    def test_defaults_resolve(self):
        config = ExperimentConfig(devices=12)
        assert config.frames == 30000
        assert config.candidates == 12
        assert config.run_id == "rnn-ugq-n12-s0"
        assert (config.variant, config.quantizer) == ("rnn", "ugq")
        assert ExperimentConfig(devices=10).frames == 10000

    def test_order_preserving_candidate_limit(self):
        with pytest.raises(ValueError):
            ExperimentConfig(devices=3, algo="dnn-op", candidates=5)

    def test_exhaustive_reference_cap(self):
        with pytest.raises(ValueError):
            ExperimentConfig(devices=20, reference="exhaustive")

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            ExperimentConfig(devices=3, learning_rate=0.1)


class TestRunExperiment:
    def test_writes_run_directory(self, tmp_path):
        out_dir = run_experiment(small_config(tmp_path))
        payload = json.loads((out_dir / "config.json").read_text())
        assert payload["schema_version"] == 1
        assert payload["config"]["devices"] == 3
        assert SystemParams.model_validate(payload["params"]).n_devices == 3

        metrics = pd.read_csv(out_dir / "metrics.csv")
        assert list(metrics.columns) == METRIC_COLUMNS
        assert list(metrics["frame"]) == list(range(25))
        assert metrics["loss"].notna().sum() == 2
        assert metrics["decision_time_s"].isna().all()

        summary = load_summary(out_dir)
        assert summary.average_normalized_rate == pytest.approx(metrics["normalized_rate"].mean())
        assert summary.early_normalized_rate == pytest.approx(metrics["normalized_rate"].mean())
        assert summary.converged_rate_variance is None
        assert summary.total_time_s is None
        assert summary.final_loss == pytest.approx(metrics["loss"].dropna().mean())

    def test_zero_frames(self, tmp_path):
        out_dir = run_experiment(small_config(tmp_path, frames=0))
        assert (out_dir / "metrics.csv").read_text().strip() == ",".join(METRIC_COLUMNS)
        summary = load_summary(out_dir)
        assert summary.average_normalized_rate is None
        assert summary.final_loss is None

    def test_reruns_are_byte_identical(self, tmp_path):
        first = run_experiment(small_config(tmp_path, "first", algo="rnn-ugq"))
        second = run_experiment(small_config(tmp_path, "second", algo="rnn-ugq"))
        assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()
        assert (first / "summary.json").read_bytes() == (second / "summary.json").read_bytes()

    def test_timing_recorded_by_default(self, tmp_path):
        out_dir = run_experiment(small_config(tmp_path, frames=3, record_timing=True))
        assert pd.read_csv(out_dir / "metrics.csv")["decision_time_s"].notna().all()
        assert load_summary(out_dir).total_time_s > 0.0

    def test_default_out_dir(self, output_root):
        out_dir = run_experiment(ExperimentConfig(devices=3, frames=2, seed=4, algo="dnn-op"))
        assert out_dir == output_root / "dnn-op-n3-s4"
        assert (out_dir / "summary.json").is_file()

    def test_params_file(self, tmp_path):
        params_path = tmp_path / "params.json"
        SystemParams.default(3, seed=8).to_json_file(params_path)
        out_dir = run_experiment(small_config(tmp_path, frames=2, params_file=str(params_path)))
        payload = json.loads((out_dir / "config.json").read_text())
        assert payload["params"] == json.loads(params_path.read_text())

    def test_params_file_device_mismatch(self, tmp_path):
        params_path = tmp_path / "params.json"
        SystemParams.default(5).to_json_file(params_path)
        with pytest.raises(InvalidArgumentError):
            run_experiment(small_config(tmp_path, params_file=str(params_path)))

    def test_partial_results_written_on_frame_error(self, tmp_path, monkeypatch):
        real = trainer_module.select_action
        calls = {"count": 0}

        def fails_on_third_frame(*args, **kwargs):
            calls["count"] += 1
            if calls["count"] == 3:
                raise SolverError("no candidate converged")
            return real(*args, **kwargs)

        monkeypatch.setattr(trainer_module, "select_action", fails_on_third_frame)
        config = small_config(tmp_path)
        with pytest.raises(FrameError):
            run_experiment(config)
        metrics = pd.read_csv(tmp_path / "run" / "metrics.csv")
        assert list(metrics["frame"]) == [0, 1]
        assert load_summary(tmp_path / "run").frames == 25


class TestCompareRuns:
    def test_best_rate_first(self, tmp_path, capsys):
        write_summary(tmp_path / "a", "a", 0.91)
        write_summary(tmp_path / "b", "b", 0.99)
        write_summary(tmp_path / "c", "c", None)
        table = compare_runs([tmp_path / "a", tmp_path / "c", tmp_path / "b"], out=tmp_path / "table.csv")
        assert list(table["run_id"]) == ["b", "a", "c"]
        assert "average_normalized_rate" in capsys.readouterr().out
        assert list(pd.read_csv(tmp_path / "table.csv")["run_id"]) == ["b", "a", "c"]

    def test_missing_summary_skipped(self, tmp_path):
        write_summary(tmp_path / "a", "a", 0.9)
        (tmp_path / "empty").mkdir()
        table = compare_runs([tmp_path / "empty", tmp_path / "a"])
        assert list(table["run_id"]) == ["a"]

    def test_matrix_runs_four_configurations(self, tmp_path):
        table = run_matrix(3, seed=1, frames=4, out_root=tmp_path, record_timing=False)
        assert sorted(table["algo"]) == ["dnn-op", "dnn-ugq", "rnn-op", "rnn-ugq"]
        assert (tmp_path / "comparison-n3-s1.csv").is_file()
        assert (tmp_path / "rnn-op-n3-s1" / "metrics.csv").is_file()


class TestCli:
    def test_run(self, tmp_path, capsys):
        out_dir = tmp_path / "cli-run"
        code = main(["run", "--devices", "3", "--frames", "12", "--algo", "dnn-op",
                     "--no-timing", "--out", str(out_dir)])
        assert code == 0
        assert str(out_dir) in capsys.readouterr().out
        assert len(pd.read_csv(out_dir / "metrics.csv")) == 12

    def test_invalid_configuration(self, tmp_path):
        code = main(["run", "--devices", "3", "--algo", "dnn-op", "--candidates", "9",
                     "--out", str(tmp_path / "bad")])
        assert code == 2

    def test_missing_params_file(self, tmp_path):
        code = main(["run", "--devices", "3", "--frames", "2", "--params", str(tmp_path / "missing.json"),
                     "--out", str(tmp_path / "bad")])
        assert code == 1

    def test_compare(self, tmp_path):
        write_summary(tmp_path / "a", "a", 0.9)
        assert main(["compare", str(tmp_path / "a"), "--out", str(tmp_path / "cmp.csv")]) == 0
        assert (tmp_path / "cmp.csv").is_file()

    def test_resume_from_checkpoint(self, tmp_path, fast_training):
        first = tmp_path / "first"
        assert main(["run", "--devices", "3", "--frames", "20", "--algo", "dnn-ugq",
                     "--no-timing", "--out", str(first)]) == 0
        checkpoint = first / "checkpoints" / "frame_000020.ckpt"
        assert checkpoint.is_file()
        assert main(["run", "--devices", "3", "--frames", "5", "--algo", "dnn-ugq", "--no-timing",
                     "--resume", str(checkpoint), "--out", str(tmp_path / "second")]) == 0
        assert main(["run", "--devices", "3", "--frames", "5", "--algo", "rnn-ugq", "--no-timing",
                     "--resume", str(checkpoint), "--out", str(tmp_path / "third")]) == 1


@pytest.mark.slow
def test_table_ordering_at_thirty_devices(tmp_path):
    table = run_matrix(30, seed=0, out_root=tmp_path, record_timing=False)
    ranked = list(table["algo"])
    assert ranked.index("rnn-ugq") < ranked.index("dnn-op")


@pytest.mark.slow
def test_classical_ordering_at_twelve_devices(tmp_path):
    rates = {"rnn-ugq": [], "dnn-op": []}
    for seed in (0, 1, 2):
        table = run_matrix(12, seed=seed, frames=15000, out_root=tmp_path / f"s{seed}", record_timing=False)
        by_algo = table.set_index("algo")["average_normalized_rate"]
        for algo in rates:
            rates[algo].append(float(by_algo[algo]))
    assert np.mean(rates["rnn-ugq"]) >= np.mean(rates["dnn-op"]) + 0.003
