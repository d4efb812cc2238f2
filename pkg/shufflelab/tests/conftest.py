"""Test configuration and fixtures for shufflelab tests."""

import numpy as np
import pytest

from ..seqcore import Alphabet, RandomStream, ReadPool, random_pool
from ..settings import LabSettings


@pytest.fixture
def test_settings():
    """Settings independent of the environment."""
    return LabSettings(
        master_seed=7,
        log_level="WARNING",
        output_format="csv",
        record_runtime=False,
        workers=1,
    )


@pytest.fixture
def stream():
    """Fixed root stream for reproducible tests."""
    return RandomStream(7, "tests")


@pytest.fixture
def gen():
    """Plain numpy generator for statistical checks."""
    return np.random.default_rng(12345)


@pytest.fixture
def binary_pool(stream):
    """64 random binary sequences of length 32."""
    return random_pool(64, 32, Alphabet.BINARY, stream.child("binary_pool"))


@pytest.fixture
def dna_pool(stream):
    """20 random DNA sequences of length 60."""
    return random_pool(20, 60, Alphabet.QUATERNARY, stream.child("dna_pool"))


@pytest.fixture
def tiny_pool():
    """Three short binary reads with a repeat."""
    return ReadPool.from_texts(["000", "000", "101"], Alphabet.BINARY)
