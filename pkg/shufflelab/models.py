"""
Pydantic models for experiment configuration and trial records.
"""

import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .seqcore import Alphabet

SCHEMA_VERSION = 1


class ExperimentKind(str, Enum):
    """Experiment kind enum."""
    CODEC_TRIAL = "codec-trial"
    CAPACITY_SWEEP = "capacity-sweep"
    TRADEOFF = "tradeoff"
    TORN_PAPER = "torn-paper"
    CLUSTER_PIPELINE = "cluster-pipeline"
    PROBE = "probe"


TRIAL_KINDS = {
    ExperimentKind.CODEC_TRIAL,
    ExperimentKind.TORN_PAPER,
    ExperimentKind.CLUSTER_PIPELINE,
    ExperimentKind.PROBE,
}


class ExperimentConfig(BaseModel):
    """One experiment, loaded from a JSON document."""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    schema_version: Literal[1] = SCHEMA_VERSION
    kind: ExperimentKind
    M: int = Field(default=64, ge=1, description="Number of stored sequences")
    L: Optional[int] = Field(default=None, ge=1, description="Sequence length")
    beta: Optional[float] = Field(default=None, gt=0, description="L / log2(M)")
    alphabet: str = Field(default="binary", description="binary or quaternary")
    sampling: str = Field(default="poisson:2", description="Compact sampling spec")
    noise: str = Field(default="identity", description="Compact noise spec")
    trials: int = Field(default=1, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, description="Master seed (settings default)")
    output: Optional[str] = None

    # codec-trial
    scheme: Literal["index", "linear"] = "index"
    rate: Optional[float] = Field(default=None, ge=0, description="Target rate in bits per symbol")
    rate_fraction: Optional[float] = Field(default=None, ge=0, description="Target rate as a fraction of capacity")
    inner: str = "none"
    n_outer: Optional[int] = Field(default=None, ge=1)
    round_up: bool = False
    B: Optional[int] = Field(default=None, ge=1, description="Tag length of the linear scheme")
    num_messages: int = Field(default=64, ge=1)
    epsilon: Optional[float] = Field(default=None, ge=0)

    # torn-paper
    n: int = Field(default=1 << 16, ge=2, description="Length of the torn sequence")
    torn: str = "geom:1"

    # cluster-pipeline
    mode: Literal["substitution", "indel"] = "substitution"
    k: Optional[int] = Field(default=None, ge=1)
    h: Optional[int] = Field(default=None, ge=1)
    bands: Optional[int] = Field(default=None, ge=1)
    rows: Optional[int] = Field(default=None, ge=1)
    tau: Optional[float] = Field(default=None, gt=0, le=1)

    # probe
    probe: Literal["rank", "edges", "incorrect-edges"] = "rank"
    delta: float = Field(default=0.0, ge=0, lt=1)
    pairs: int = Field(default=10_000, ge=1)

    # capacity-sweep / tradeoff
    figure: Optional[str] = Field(default=None, description="tradeoff, torn, bsc-regimes, bec-regimes or capacity")
    grid: Dict[str, List[float]] = Field(default_factory=dict)

    @field_validator("alphabet")
    @classmethod
    def validate_alphabet(cls, v: str) -> str:
        return Alphabet.parse(v).name.lower()

    @model_validator(mode="after")
    def check_length(self) -> "ExperimentConfig":
        if self.L is not None and self.beta is not None:
            raise ValueError("give exactly one of L and beta, not both")
        needs_length = self.kind in {ExperimentKind.CODEC_TRIAL, ExperimentKind.CLUSTER_PIPELINE} or (
            self.kind is ExperimentKind.PROBE and self.probe == "incorrect-edges"
        )
        if needs_length and self.L is None and self.beta is None:
            raise ValueError(f"{self.kind.value} needs L or beta")
        if self.rate is not None and self.rate_fraction is not None:
            raise ValueError("give at most one of rate and rate_fraction")
        return self

    @property
    def alphabet_enum(self) -> Alphabet:
        return Alphabet.parse(self.alphabet)

    @property
    def length(self) -> int:
        """L, or round(beta * log2 M) when beta was given."""
        if self.L is not None:
            return self.L
        if self.beta is None:
            raise ValueError("neither L nor beta is set")
        return max(1, int(round(self.beta * math.log2(self.M))))

    @property
    def actual_beta(self) -> float:
        """L / log2 M for the length actually used (inf for M = 1)."""
        return self.length / math.log2(self.M) if self.M > 1 else math.inf


class TrialRecord(BaseModel):
    """Outcome of one seeded trial."""

    trial: int = Field(..., ge=0)
    seed: int = Field(..., description="Fingerprint of the trial's random stream")
    success: bool
    metrics: Dict[str, Any] = Field(default_factory=dict)

    def flat(self) -> Dict[str, Any]:
        return {"trial": self.trial, "seed": self.seed, "success": self.success, **self.metrics}


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    return ExperimentConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
