"""
Alphabets, sequences, read pools, histograms and the randomness contract.

Every stochastic routine in shufflelab draws from a ``RandomStream``: a
(master seed, label, trial path) triple mapped onto a Philox counter-based
generator, so that the same triple yields the same numbers on every platform.
"""

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np

from .errors import AlphabetMismatchError, StructuralError

logger = logging.getLogger(__name__)

ERASURE_CHAR = "?"


class Alphabet(Enum):
    """Channel input alphabets. The value is the number of data symbols."""

    BINARY = 2
    QUATERNARY = 4

    @property
    def size(self) -> int:
        return self.value

    @property
    def chars(self) -> str:
        return "01" if self is Alphabet.BINARY else "ACGT"

    @property
    def erasure(self) -> int:
        """Internal index of the erasure marker (one past the last data symbol)."""
        return self.value

    @property
    def bits_per_symbol(self) -> int:
        return 1 if self is Alphabet.BINARY else 2

    @classmethod
    def parse(cls, name: Union[str, int, "Alphabet"]) -> "Alphabet":
        """Accept ``binary``/``2``/``quaternary``/``dna``/``4``."""
        if isinstance(name, Alphabet):
            return name
        key = str(name).strip().lower()
        if key in {"2", "binary", "bin"}:
            return cls.BINARY
        if key in {"4", "quaternary", "dna", "acgt"}:
            return cls.QUATERNARY
        raise ValueError(f"unknown alphabet {name!r}")

    def encode_text(self, text: str) -> bytes:
        """Map characters to symbol indices; ``?`` becomes the erasure index."""
        table = {c: i for i, c in enumerate(self.chars)}
        table[ERASURE_CHAR] = self.erasure
        try:
            return bytes(table[c] for c in text)
        except KeyError as e:
            raise AlphabetMismatchError(
                f"character {e.args[0]!r} is not in the {self.name.lower()} alphabet"
            ) from e

    def decode_text(self, symbols: bytes) -> str:
        chars = self.chars + ERASURE_CHAR
        return "".join(chars[s] for s in symbols)


@dataclass(frozen=True)
class Sequence:
    """Immutable symbol string; equality and hashing are by content."""

    symbols: bytes
    alphabet: Alphabet = Alphabet.BINARY

    def __post_init__(self):
        if self.symbols and max(self.symbols) > self.alphabet.erasure:
            raise AlphabetMismatchError(
                f"symbol index {max(self.symbols)} invalid for {self.alphabet.name.lower()}"
            )

    @classmethod
    def from_text(cls, text: str, alphabet: Alphabet = Alphabet.BINARY) -> "Sequence":
        return cls(alphabet.encode_text(text.strip()), alphabet)

    @classmethod
    def from_array(cls, arr: np.ndarray, alphabet: Alphabet = Alphabet.BINARY) -> "Sequence":
        return cls(np.asarray(arr, dtype=np.uint8).tobytes(), alphabet)

    def to_text(self) -> str:
        return self.alphabet.decode_text(self.symbols)

    @property
    def array(self) -> np.ndarray:
        """Read-only uint8 view of the symbols."""
        return np.frombuffer(self.symbols, dtype=np.uint8)

    @property
    def has_erasures(self) -> bool:
        return self.alphabet.erasure in self.symbols

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return self.to_text()

    def sort_key(self) -> Tuple[int, bytes]:
        """Canonical order: shorter first, then lexicographic by symbol index."""
        return (len(self.symbols), self.symbols)


@dataclass(frozen=True)
class ReadPool:
    """
    A list of reads over one alphabet.

    Input pools are ordered; channel outputs are multisets (``ordered=False``)
    whose order carries no information. ``fixed_length=False`` exempts
    torn-paper and indel outputs from the equal-length check.
    """

    reads: Tuple[Sequence, ...]
    alphabet: Alphabet = Alphabet.BINARY
    ordered: bool = True
    fixed_length: bool = True

    def __post_init__(self):
        object.__setattr__(self, "reads", tuple(self.reads))
        for read in self.reads:
            if read.alphabet is not self.alphabet:
                raise StructuralError(
                    f"pool over {self.alphabet.name.lower()} holds a "
                    f"{read.alphabet.name.lower()} read"
                )
        if self.fixed_length and self.reads:
            lengths = {len(r) for r in self.reads}
            if len(lengths) > 1:
                raise StructuralError(f"fixed-length pool has mixed lengths {sorted(lengths)}")

    @classmethod
    def from_texts(
        cls, texts: Iterable[str], alphabet: Alphabet = Alphabet.BINARY, **kwargs
    ) -> "ReadPool":
        return cls(tuple(Sequence.from_text(t, alphabet) for t in texts), alphabet, **kwargs)

    @classmethod
    def from_matrix(
        cls, matrix: np.ndarray, alphabet: Alphabet = Alphabet.BINARY, ordered: bool = True
    ) -> "ReadPool":
        """Build a fixed-length pool from an (N, L) symbol matrix."""
        matrix = np.ascontiguousarray(matrix, dtype=np.uint8)
        if matrix.ndim != 2:
            raise StructuralError("symbol matrix must be two-dimensional")
        reads = tuple(Sequence(row.tobytes(), alphabet) for row in matrix)
        return cls(reads, alphabet, ordered=ordered)

    @property
    def length(self) -> Optional[int]:
        """Common read length L, or None for empty or variable-length pools."""
        if not self.reads or not self.fixed_length:
            return None
        return len(self.reads[0])

    def to_matrix(self) -> np.ndarray:
        """(N, L) uint8 matrix of a fixed-length pool."""
        if not self.fixed_length:
            raise StructuralError("variable-length pools have no symbol matrix")
        if not self.reads:
            return np.zeros((0, 0), dtype=np.uint8)
        return np.frombuffer(b"".join(r.symbols for r in self.reads), dtype=np.uint8).reshape(
            len(self.reads), -1
        )

    def texts(self) -> List[str]:
        return [r.to_text() for r in self.reads]

    def __len__(self) -> int:
        return len(self.reads)

    def __iter__(self) -> Iterator[Sequence]:
        return iter(self.reads)

    def __getitem__(self, i: int) -> Sequence:
        return self.reads[i]


@dataclass(frozen=True)
class Histogram:
    """Multiset of sequences; zero counts are never stored."""

    counts: Dict[Sequence, int] = field(default_factory=dict)
    alphabet: Alphabet = Alphabet.BINARY

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, seq: Sequence) -> int:
        return self.counts.get(seq, 0)

    def items(self) -> List[Tuple[Sequence, int]]:
        """Entries in canonical sequence order."""
        return sorted(self.counts.items(), key=lambda kv: kv[0].sort_key())

    def to_pool(self) -> ReadPool:
        """Expand back into an unordered pool, entries in canonical order."""
        reads = [seq for seq, n in self.items() for _ in range(n)]
        lengths = {len(s) for s in reads}
        return ReadPool(tuple(reads), self.alphabet, ordered=False, fixed_length=len(lengths) <= 1)


def pool_to_histogram(pool: ReadPool) -> Histogram:
    """Count each distinct read of ``pool``."""
    return Histogram(dict(Counter(pool.reads)), pool.alphabet)


def multiset_equal(a: ReadPool, b: ReadPool) -> bool:
    """True iff the two pools hold the same reads with the same multiplicities."""
    return a.alphabet is b.alphabet and pool_to_histogram(a) == pool_to_histogram(b)


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "big")


@dataclass(frozen=True)
class RandomStream:
    """
    Reproducible substream identity.

    ``generator()`` always restarts the stream, so two calls on equal
    streams return generators producing identical output.
    """

    seed: int
    label: str = "root"
    path: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("master seed must fit in 64 bits")

    def _seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=self.seed, spawn_key=(_label_key(self.label), *self.path)
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self._seed_sequence()))

    def fingerprint(self) -> int:
        """63-bit integer identifying the stream, reported in trial records."""
        return int(self._seed_sequence().generate_state(1, np.uint64)[0] >> np.uint64(1))

    def child(self, label: str) -> "RandomStream":
        """Named sub-stream, e.g. ``stream.child("noise")``."""
        return RandomStream(self.seed, f"{self.label}/{label}", self.path)


RngLike = Union[RandomStream, np.random.Generator]


def derive_stream(master: RandomStream, trial_index: int) -> RandomStream:
    """Independent, reproducible substream for one trial."""
    if trial_index < 0:
        raise ValueError("trial_index must be non-negative")
    return RandomStream(master.seed, master.label, master.path + (trial_index,))


def as_generator(rng: RngLike) -> np.random.Generator:
    """Accept either a RandomStream or an already-running numpy Generator."""
    if isinstance(rng, RandomStream):
        return rng.generator()
    return rng


def split_generators(rng: RngLike, *labels: str) -> List[np.random.Generator]:
    """
    One generator per consumer label.

    A RandomStream yields independent named children; a bare Generator is
    shared by all consumers in call order.
    """
    if isinstance(rng, RandomStream):
        return [rng.child(label).generator() for label in labels]
    return [rng] * len(labels)


def random_pool(M: int, L: int, alphabet: Alphabet, rng: RngLike) -> ReadPool:
    """M i.i.d. uniform sequences of length L."""
    gen = as_generator(rng)
    matrix = gen.integers(0, alphabet.size, size=(M, L), dtype=np.uint8)
    return ReadPool.from_matrix(matrix, alphabet)


def read_pool(
    path: Union[str, Path], alphabet: Alphabet, fixed_length: Optional[bool] = None
) -> ReadPool:
    """
    Load the one-sequence-per-line text format.

    With ``fixed_length=None`` the pool is fixed-length iff every line has the same length.
    """
    lines = [line for line in Path(path).read_text(encoding="ascii").splitlines() if line]
    if fixed_length is None:
        fixed_length = len({len(line) for line in lines}) <= 1
    pool = ReadPool.from_texts(
        lines, alphabet, ordered=False, fixed_length=fixed_length
    )
    logger.debug(f"Loaded {len(pool)} reads from {path}")
    return pool


def write_pool(pool: ReadPool, path: Union[str, Path]) -> None:
    """Write one sequence per line, '\\n'-terminated, no header."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for read in pool.reads:
            fh.write(read.to_text())
            fh.write("\n")
    logger.debug(f"Wrote {len(pool)} reads to {path}")
