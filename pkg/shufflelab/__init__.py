"""Shuffling-channel simulator, capacity evaluators, codecs and read clustering."""

from .capacity import CapacityResult, Regime, unified_rate
from .channel import parse_noise, parse_torn, tear, transmit
from .cluster_recon import LshParams, run_pipeline, score_clustering
from .codec_index import decode, encode, plan_index_code, rate_of
from .codec_linear import decode_linear, encode_linear, gen_codebook
from .errors import ShuffleLabError
from .harness import emit, load_records, run, sweep
from .models import ExperimentConfig, ExperimentKind, TrialRecord, load_config
from .sampling import parse_sampling
from .seqcore import Alphabet, RandomStream, ReadPool, Sequence, derive_stream
from .settings import LabSettings, load_settings

__version__ = "1.0.0"

__all__ = [
    "Alphabet",
    "CapacityResult",
    "ExperimentConfig",
    "ExperimentKind",
    "LabSettings",
    "LshParams",
    "RandomStream",
    "ReadPool",
    "Regime",
    "Sequence",
    "ShuffleLabError",
    "TrialRecord",
    "decode",
    "decode_linear",
    "derive_stream",
    "emit",
    "encode",
    "encode_linear",
    "gen_codebook",
    "load_config",
    "load_records",
    "load_settings",
    "parse_noise",
    "parse_sampling",
    "parse_torn",
    "plan_index_code",
    "rate_of",
    "run",
    "run_pipeline",
    "score_clustering",
    "sweep",
    "tear",
    "transmit",
    "unified_rate",
]
