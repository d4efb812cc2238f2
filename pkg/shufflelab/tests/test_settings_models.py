"""Tests for settings and experiment models."""

import math

import pytest
from pydantic import ValidationError

from ..models import ExperimentConfig, ExperimentKind, TrialRecord, load_config
from ..seqcore import Alphabet
from ..settings import LabSettings


class TestLabSettings:
    """Environment-driven defaults."""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("SHUFFLELAB_MASTER_SEED", raising=False)
        settings = LabSettings(_env_file=None)
        assert settings.output_format == "csv"
        assert settings.workers == 1
        assert settings.lsh_hashes == settings.lsh_bands * settings.lsh_rows

    def test_environment_prefix(self, monkeypatch):
        monkeypatch.setenv("SHUFFLELAB_MASTER_SEED", "99")
        monkeypatch.setenv("SHUFFLELAB_LOG_LEVEL", "debug")
        settings = LabSettings(_env_file=None)
        assert settings.master_seed == 99
        assert settings.log_level == "DEBUG"

    def test_rejects_bad_values(self):
        with pytest.raises(ValidationError):
            LabSettings(_env_file=None, log_level="chatty")
        with pytest.raises(ValidationError):
            LabSettings(_env_file=None, master_seed=-1)


class TestExperimentConfig:
    def test_beta_gives_length(self):
        config = ExperimentConfig(kind=ExperimentKind.CODEC_TRIAL, M=256, beta=4)
        assert config.length == 32
        assert config.actual_beta == 4.0

    def test_alphabet_normalised(self):
        config = ExperimentConfig(kind=ExperimentKind.CODEC_TRIAL, L=10, alphabet="DNA")
        assert config.alphabet == "quaternary"
        assert config.alphabet_enum is Alphabet.QUATERNARY

    def test_single_sequence_beta(self):
        config = ExperimentConfig(kind=ExperimentKind.CODEC_TRIAL, M=1, L=10)
        assert math.isinf(config.actual_beta)

    @pytest.mark.parametrize(
        "fields",
        [
            {"kind": "codec-trial"},
            {"kind": "codec-trial", "L": 8, "beta": 2},
            {"kind": "codec-trial", "L": 8, "rate": 0.1, "rate_fraction": 0.5},
            {"kind": "probe", "probe": "incorrect-edges"},
            {"kind": "codec-trial", "L": 8, "colour": "blue"},
            {"kind": "tradeoff", "schema_version": 2},
        ],
    )
    def test_invalid(self, fields):
        with pytest.raises(ValidationError):
            ExperimentConfig(**fields)

    def test_load_config(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"kind": "torn-paper", "n": 1024, "torn": "fixed:8", "trials": 2}')
        config = load_config(path)
        assert config.kind is ExperimentKind.TORN_PAPER
        assert config.n == 1024


class TestTrialRecord:
    def test_flat(self):
        record = TrialRecord(trial=3, seed=42, success=False, metrics={"reads": 7})
        assert record.flat() == {"trial": 3, "seed": 42, "success": False, "reads": 7}

    def test_negative_trial_rejected(self):
        with pytest.raises(ValidationError):
            TrialRecord(trial=-1, seed=0, success=True)
