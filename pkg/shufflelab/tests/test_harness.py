"""Tests for the experiment harness: trials, summaries, sweeps and record files."""

import math

import pytest

from ..errors import DomainError
from ..harness import emit, load_records, run, summarize, sweep
from ..models import ExperimentConfig, ExperimentKind, TrialRecord


def _codec_config(**overrides):
    fields = dict(
        kind=ExperimentKind.CODEC_TRIAL,
        M=16,
        L=16,
        rate=0.25,
        sampling="poisson:3",
        noise="bsc:0.005",
        trials=6,
        seed=1,
    )
    fields.update(overrides)
    return ExperimentConfig(**fields)


class TestSummarize:
    """Success frequency, Wilson interval and metric means."""

    @pytest.fixture
    def records(self):
        return [
            TrialRecord(trial=i, seed=100 + i, success=ok, metrics={"reads": float(i), "silent_error": False})
            for i, ok in enumerate([True, False, True, True])
        ]

    def test_rates(self, records):
        summary = summarize(records)
        assert summary["trials"] == 4
        assert summary["successes"] == 3
        assert summary["success_rate"] == 0.75
        assert summary["ci_low"] < 0.75 < summary["ci_high"]
        assert summary["mean_reads"] == 1.5
        assert "mean_silent_error" not in summary

    def test_order_independent(self, records):
        assert summarize(records[::-1]) == summarize(records)

    def test_empty(self):
        assert summarize([]) == {"trials": 0, "successes": 0}


class TestRun:
    def test_records_are_reproducible(self, test_settings):
        first = emit(run(_codec_config(), test_settings).records)
        second = emit(run(_codec_config(), test_settings).records)
        assert first == second

    def test_workers_do_not_change_results(self, test_settings):
        serial = run(_codec_config(), test_settings)
        parallel = run(_codec_config(), test_settings.model_copy(update={"workers": 3}))
        assert [r.flat() for r in serial.records] == [r.flat() for r in parallel.records]

    def test_seed_changes_results(self, test_settings):
        a = run(_codec_config(seed=1), test_settings)
        b = run(_codec_config(seed=2), test_settings)
        assert [r.seed for r in a.records] != [r.seed for r in b.records]

    def test_rate_zero(self, test_settings):
        result = run(_codec_config(rate=0.0, sampling="fixed:1", noise="identity"), test_settings)
        assert result.all_succeeded
        assert all(r.metrics["rate"] == 0.0 for r in result.records)

    def test_rate_above_capacity_warns(self, test_settings):
        result = run(_codec_config(L=8, rate=0.9, sampling="poisson:2", noise="identity", trials=2), test_settings)
        assert result.warnings
        assert "exceeds capacity" in result.summary["warnings"]

    def test_linear_scheme_rejects_substitutions(self, test_settings):
        with pytest.raises(DomainError):
            run(_codec_config(scheme="linear", L=6, M=2, noise="bsc:0.1"), test_settings)

    def test_sweeps_are_not_trials(self, test_settings):
        with pytest.raises(DomainError):
            run(ExperimentConfig(kind=ExperimentKind.CAPACITY_SWEEP), test_settings)

    def test_torn_paper(self, test_settings):
        config = ExperimentConfig(kind=ExperimentKind.TORN_PAPER, n=4096, torn="geom:0.01", trials=3, seed=4)
        result = run(config, test_settings)
        assert result.all_succeeded
        record = result.records[0]
        assert record.metrics["beta"] == pytest.approx(1 / (0.01 * 12))
        assert 0.0 <= record.metrics["coverage"] <= 1.0

    def test_rank_probe(self, test_settings):
        config = ExperimentConfig(kind=ExperimentKind.PROBE, probe="rank", B=20, delta=0.5, trials=20, seed=5)
        assert run(config, test_settings).summary["success_rate"] >= 0.9


class TestSweep:
    """Evaluator rows over grids."""

    def test_tradeoff_default_grid(self):
        rows = sweep(ExperimentConfig(kind=ExperimentKind.TRADEOFF))
        assert len(rows) == 6
        assert {"lam", "beta", "R_s", "R_r", "coverage_fraction"} <= rows[0].keys()

    def test_torn_rows(self):
        config = ExperimentConfig(kind=ExperimentKind.CAPACITY_SWEEP, figure="torn", grid={"beta": [1, 2]})
        rows = sweep(config)
        assert [r["beta"] for r in rows] == [1.0, 2.0]
        assert rows[0]["torn"] == pytest.approx(math.exp(-1))
        assert rows[0]["shuffling"] == 0.0

    def test_capacity_rows(self):
        config = ExperimentConfig(
            kind=ExperimentKind.CAPACITY_SWEEP,
            figure="capacity",
            noise="bsc:0.01",
            grid={"lam": [2], "p": [0.01, 0.05], "beta": [4]},
        )
        rows = sweep(config)
        assert len(rows) == 2
        assert rows[0]["rate"] > rows[1]["rate"] > 0.0

    def test_unknown_figure(self):
        with pytest.raises(DomainError):
            sweep(ExperimentConfig(kind=ExperimentKind.CAPACITY_SWEEP, figure="histogram"))


class TestRecordFiles:
    """CSV and JSON emission."""

    @pytest.fixture
    def records(self):
        return [
            TrialRecord(trial=0, seed=11, success=True, metrics={"rate": 0.5, "failure_reason": ""}),
            TrialRecord(trial=1, seed=12, success=False, metrics={"rate": 0.5, "failure_reason": "block 0, row 2"}),
        ]

    def test_header_only_when_empty(self):
        assert emit([]) == "trial,seed,success\n"

    def test_csv_quotes_commas(self, records):
        text = emit(records)
        assert text.splitlines()[0] == "trial,seed,success,rate,failure_reason"
        assert '"block 0, row 2"' in text

    @pytest.mark.parametrize("suffix,fmt", [(".csv", "csv"), (".json", "json")])
    def test_written_file_loads_back(self, records, tmp_path, suffix, fmt):
        path = tmp_path / f"records{suffix}"
        text = emit(records, path, fmt)
        assert path.read_text(encoding="ascii") == text
        loaded = load_records(path)
        assert [r["trial"] for r in loaded] == [0, 1]
        assert [bool(r["success"]) for r in loaded] == [True, False]
        assert loaded[1]["failure_reason"] == "block 0, row 2"

    def test_unknown_format(self, records):
        with pytest.raises(DomainError):
            emit(records, fmt="parquet")
