"""
Channel simulators: the noisy shuffling-sampling channel and the torn-paper channel.

The shuffling-sampling channel draws every input sequence N_i ~ Q times,
shuffles all copies uniformly and corrupts each copy independently. The
torn-paper channel cuts one long sequence into unordered fragments and may
lose some of them.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence as Seq, Tuple

import numpy as np

from .errors import (
    AlphabetMismatchError,
    ContractViolation,
    DomainError,
    ShuffleLabError,
    SpecParseError,
)
from .sampling import DrawCounts, SamplingSpec, sample_counts
from .seqcore import (
    Alphabet,
    Histogram,
    ReadPool,
    RngLike,
    Sequence,
    as_generator,
    split_generators,
)

logger = logging.getLogger(__name__)


# ============== Per-symbol noise ==============


class NoiseSpec(ABC):
    """Per-read noise law p(y|x)."""

    # Length-preserving laws act on the whole (N, L) read matrix at once
    preserves_length: bool = True

    def check_alphabet(self, alphabet: Alphabet) -> None:
        """Raise AlphabetMismatchError when the law is undefined on ``alphabet``."""

    def corrupt_matrix(self, matrix: np.ndarray, alphabet: Alphabet, gen: np.random.Generator) -> np.ndarray:
        """Corrupt every row of an (N, L) symbol matrix."""
        raise NotImplementedError(f"{type(self).__name__} changes read lengths")

    def corrupt_read(self, symbols: np.ndarray, alphabet: Alphabet, gen: np.random.Generator) -> np.ndarray:
        """Corrupt a single read."""
        return self.corrupt_matrix(symbols[None, :], alphabet, gen)[0]


@dataclass(frozen=True)
class Identity(NoiseSpec):
    def corrupt_matrix(self, matrix, alphabet, gen):
        return matrix.copy()


def _validate_p(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class BSC(NoiseSpec):
    """Binary symmetric channel: each bit flipped with probability p."""

    p: float

    def __post_init__(self):
        _validate_p("p", self.p)

    def check_alphabet(self, alphabet):
        if alphabet is not Alphabet.BINARY:
            raise AlphabetMismatchError("BSC noise needs the binary alphabet; use QSC for DNA")

    def corrupt_matrix(self, matrix, alphabet, gen):
        flips = gen.random(matrix.shape) < self.p
        return matrix ^ flips.astype(np.uint8)


@dataclass(frozen=True)
class BEC(NoiseSpec):
    """Erasure channel: each symbol replaced by the erasure marker with probability p."""

    p: float

    def __post_init__(self):
        _validate_p("p", self.p)

    def corrupt_matrix(self, matrix, alphabet, gen):
        out = matrix.copy()
        out[gen.random(matrix.shape) < self.p] = alphabet.erasure
        return out


@dataclass(frozen=True)
class QSC(NoiseSpec):
    """Quaternary symmetric channel: total flip probability p split evenly over the 3 other bases."""

    p: float

    def __post_init__(self):
        _validate_p("p", self.p)

    def check_alphabet(self, alphabet):
        if alphabet is not Alphabet.QUATERNARY:
            raise AlphabetMismatchError("QSC noise needs the quaternary alphabet; use BSC for bits")

    def corrupt_matrix(self, matrix, alphabet, gen):
        hit = gen.random(matrix.shape) < self.p
        offset = gen.integers(1, 4, size=matrix.shape, dtype=np.uint8)
        return np.where(hit, (matrix + offset) % 4, matrix).astype(np.uint8)


@dataclass(frozen=True)
class IndelSub(NoiseSpec):
    """
    Insertions, deletions and substitutions, processed left to right.

    Before every source position and once at the end, uniform symbols are
    inserted in a geometric burst (each further insertion with probability
    p_ins). Each source symbol is deleted with probability p_del, otherwise
    substituted by a uniformly chosen different symbol with probability
    p_sub / (1 - p_del).
    """

    p_ins: float
    p_del: float
    p_sub: float

    preserves_length = False

    def __post_init__(self):
        for name in ("p_ins", "p_del", "p_sub"):
            _validate_p(name, getattr(self, name))
        if self.p_ins + self.p_del + self.p_sub > 1.0 + 1e-12:
            raise DomainError("p_ins + p_del + p_sub must not exceed 1")
        if self.p_ins >= 1.0:
            raise DomainError("p_ins = 1 inserts forever")

    def corrupt_read(self, symbols, alphabet, gen):
        L = len(symbols)
        size = alphabet.size
        # geometric(1 - p) - 1 counts successes before the first failure
        bursts = gen.geometric(1.0 - self.p_ins, size=L + 1) - 1
        u = gen.random(L)
        deleted = u < self.p_del
        substituted = ~deleted & (u < self.p_del + self.p_sub)
        offsets = gen.integers(1, size, size=L)
        inserted = gen.integers(0, size, size=int(bursts.sum()))

        source = np.where(substituted, (symbols.astype(np.int64) + offsets) % size, symbols)
        out: List[int] = []
        cursor = 0
        for i in range(L + 1):
            if bursts[i]:
                out.extend(inserted[cursor : cursor + bursts[i]].tolist())
                cursor += bursts[i]
            if i < L and not deleted[i]:
                out.append(int(source[i]))
        return np.asarray(out, dtype=np.uint8)


def apply_noise(seq: Sequence, spec: NoiseSpec, rng: RngLike) -> Sequence:
    """
    Pass one input sequence through the noise law.

    Args:
        seq: Channel input (no erasures)
        spec: Noise law
        rng: Randomness source

    Returns:
        The corrupted read (length may differ for IndelSub)
    """
    if seq.has_erasures:
        raise ContractViolation("channel inputs must not contain erasures")
    spec.check_alphabet(seq.alphabet)
    gen = as_generator(rng)
    return Sequence.from_array(spec.corrupt_read(seq.array, seq.alphabet, gen), seq.alphabet)


# ============== Shuffling-sampling channel ==============


@dataclass(frozen=True, eq=False)
class ChannelTrace:
    """
    Full record of one channel use.

    ``origins[j]`` is the input index read j was copied from; decoders never
    look at it.
    """

    input_pool: ReadPool
    counts: DrawCounts
    permutation: np.ndarray
    output: ReadPool
    origins: np.ndarray


def transmit(
    pool: ReadPool, sampling: SamplingSpec, noise: NoiseSpec, rng: RngLike
) -> ChannelTrace:
    """
    Sample, shuffle and corrupt an input pool.

    With a RandomStream, sampling, shuffling and noise draw from separate
    named children so each stage is reproducible on its own.
    """
    if not pool.fixed_length or not len(pool):
        raise ContractViolation("transmit needs a non-empty fixed-length input pool")
    noise.check_alphabet(pool.alphabet)
    matrix = pool.to_matrix()
    if matrix.max(initial=0) >= pool.alphabet.size:
        raise ContractViolation("channel inputs must not contain erasures")

    g_sample, g_shuffle, g_noise = split_generators(rng, "sampling", "shuffle", "noise")
    counts = sample_counts(len(pool), sampling, g_sample)
    copies = np.repeat(np.arange(len(pool)), counts.counts)
    # Generator.permutation is a Fisher-Yates shuffle
    permutation = g_shuffle.permutation(len(copies))
    origins = copies[permutation]
    drawn = matrix[origins]

    if noise.preserves_length:
        output = ReadPool.from_matrix(
            noise.corrupt_matrix(drawn, pool.alphabet, g_noise), pool.alphabet, ordered=False
        )
    else:
        reads = tuple(
            Sequence.from_array(noise.corrupt_read(row, pool.alphabet, g_noise), pool.alphabet)
            for row in drawn
        )
        output = ReadPool(reads, pool.alphabet, ordered=False, fixed_length=False)

    logger.debug(
        f"Transmitted M={len(pool)} sequences into N={counts.total} reads "
        f"({int((counts.counts == 0).sum())} never drawn)"
    )
    return ChannelTrace(pool, counts, permutation, output, origins)


def histogram_channel(histogram: Histogram, lam: float, rng: RngLike) -> Histogram:
    """
    Histogram view of the noise-free Poisson sampling channel.

    Every distinct input sequence with multiplicity x is observed y ~ Poisson(lam * x)
    times.
    """
    if lam <= 0:
        raise DomainError(f"coverage must be positive, got {lam}")
    gen = as_generator(rng)
    entries = histogram.items()
    ys = gen.poisson(lam * np.array([n for _, n in entries], dtype=float))
    return Histogram(
        {seq: int(y) for (seq, _), y in zip(entries, ys) if y > 0}, histogram.alphabet
    )


# ============== Torn-paper channel ==============


class LengthLaw(ABC):
    @abstractmethod
    def cut_points(self, n: int, gen: np.random.Generator) -> np.ndarray:
        """Sorted positions in 1..n-1 where the sequence is torn."""


@dataclass(frozen=True)
class GeometricTear(LengthLaw):
    """Tear between consecutive symbols independently with probability p."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"tear probability must lie in [0, 1], got {self.p}")

    def cut_points(self, n, gen):
        return np.flatnonzero(gen.random(n - 1) < self.p) + 1


@dataclass(frozen=True)
class FixedTear(LengthLaw):
    """Pieces of exactly ell symbols (the last may be shorter)."""

    ell: int

    def __post_init__(self):
        if self.ell < 1:
            raise DomainError(f"piece length must be >= 1, got {self.ell}")

    def cut_points(self, n, gen):
        return np.arange(self.ell, n, self.ell)


@dataclass(frozen=True)
class UniformTear(LengthLaw):
    """Piece lengths uniform on 1..floor(gamma * log2 n)."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 1:
            raise DomainError(f"uniform tearing needs gamma >= 1, got {self.gamma}")

    def cut_points(self, n, gen):
        top = max(1, int(math.floor(self.gamma * _log2n(n))))
        chunk = 2 * n // (top + 1) + 16
        ends: List[np.ndarray] = []
        reached = 0
        while reached < n:
            lengths = gen.integers(1, top + 1, size=chunk)
            cum = reached + np.cumsum(lengths)
            ends.append(cum)
            reached = int(cum[-1])
        cuts = np.concatenate(ends)
        return cuts[cuts < n]


class DeletionProfile(ABC):
    @abstractmethod
    def d_hat(self, xi: np.ndarray) -> np.ndarray:
        """Asymptotic deletion profile as a function of length / log2 n."""


@dataclass(frozen=True)
class NoDeletion(DeletionProfile):
    def d_hat(self, xi):
        return np.zeros_like(xi, dtype=float)


@dataclass(frozen=True)
class ConstDeletion(DeletionProfile):
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise DomainError(f"deletion level must lie in [0, 1], got {self.eps}")

    def d_hat(self, xi):
        return np.full_like(xi, self.eps, dtype=float)


@dataclass(frozen=True)
class ExpDeletion(DeletionProfile):
    gamma_d: float

    def __post_init__(self):
        if self.gamma_d < 0:
            raise DomainError(f"decay rate must be >= 0, got {self.gamma_d}")

    def d_hat(self, xi):
        return np.exp(-self.gamma_d * np.asarray(xi, dtype=float))


def _log2n(n: int) -> float:
    # log2 of a length-1 input is 0; one bit keeps the length scale defined
    return max(math.log2(n), 1.0) if n >= 1 else 1.0


@dataclass(frozen=True)
class TornSpec:
    """
    Torn-paper channel for inputs of length n.

    With ``scaled`` (the default) a piece of length l is lost with probability
    min(1, d_hat(l / log2 n) / log2 n). With ``scaled=False`` the profile is
    used directly, min(1, d_hat(l / log2 n)).
    """

    length_law: LengthLaw
    deletion: DeletionProfile = field(default_factory=NoDeletion)
    n: Optional[int] = None
    scaled: bool = True

    def deletion_probability(self, lengths: np.ndarray, n: int) -> np.ndarray:
        logn = _log2n(n)
        d = self.deletion.d_hat(np.asarray(lengths, dtype=float) / logn)
        if self.scaled:
            d = d / logn
        return np.minimum(1.0, d)


@dataclass(frozen=True, eq=False)
class TornTrace:
    """Ground truth of one tearing: pieces in input order, which survived, output order."""

    pieces: Tuple[Sequence, ...]
    kept: np.ndarray
    order: np.ndarray
    output: ReadPool


def tear(seq: Sequence, spec: TornSpec, rng: RngLike) -> TornTrace:
    """Tear ``seq`` and keep the ground truth."""
    n = len(seq)
    if n < 1:
        raise DomainError("cannot tear an empty sequence")
    if spec.n is not None and spec.n != n:
        raise DomainError(f"torn spec is for n={spec.n}, got a sequence of length {n}")
    g_tear, g_delete, g_shuffle = split_generators(rng, "tear", "delete", "shuffle")
    cuts = spec.length_law.cut_points(n, g_tear)
    bounds = np.concatenate(([0], cuts, [n]))
    pieces = tuple(
        Sequence(seq.symbols[a:b], seq.alphabet) for a, b in zip(bounds[:-1], bounds[1:])
    )
    lengths = np.diff(bounds)
    kept = g_delete.random(len(pieces)) >= spec.deletion_probability(lengths, n)
    survivors = np.flatnonzero(kept)
    order = survivors[g_shuffle.permutation(len(survivors))]
    output = ReadPool(
        tuple(pieces[i] for i in order), seq.alphabet, ordered=False, fixed_length=False
    )
    logger.debug(f"Tore n={n} into {len(pieces)} pieces, {len(survivors)} survived")
    return TornTrace(pieces, kept, order, output)


def torn_transmit(seq: Sequence, spec: TornSpec, rng: RngLike) -> ReadPool:
    """Tear ``seq`` into unordered variable-length fragments, some possibly deleted."""
    return tear(seq, spec, rng).output


class FragmentStats(NamedTuple):
    coverage: float
    reorder_cost: float


def fragment_stats(fragments: Seq[Sequence], n: int) -> FragmentStats:
    """
    Coverage by long fragments and their reordering cost.

    Args:
        fragments: Surviving fragments of a length-n input
        n: Input length

    Returns:
        (fraction of the input covered by fragments of length >= log2 n,
         count * log2(count) / n over those fragments)
    """
    threshold = math.log2(n) if n > 1 else 0.0
    long_lengths = [len(f) for f in fragments if len(f) >= threshold]
    count = len(long_lengths)
    coverage = sum(long_lengths) / n
    reorder = count * math.log2(count) / n if count > 1 else 0.0
    return FragmentStats(coverage, reorder)


# ============== Compact spec strings ==============


def parse_noise(text: str) -> NoiseSpec:
    """Parse ``identity``, ``bsc:p``, ``bec:p``, ``qsc:p`` or ``indel:p_ins,p_del,p_sub``."""
    kind, _, args = text.strip().partition(":")
    kind = kind.lower()
    try:
        values = [float(a) for a in args.split(",")] if args else []
    except ValueError as e:
        raise SpecParseError(f"non-numeric parameter in noise spec {text!r}") from e
    expected = {"identity": 0, "none": 0, "bsc": 1, "bec": 1, "qsc": 1, "indel": 3}
    if kind not in expected:
        raise SpecParseError(f"unknown noise law {kind!r}")
    if len(values) != expected[kind]:
        raise SpecParseError(f"noise law {kind!r} takes {expected[kind]} parameter(s)")
    if kind in {"identity", "none"}:
        return Identity()
    if kind == "bsc":
        return BSC(values[0])
    if kind == "bec":
        return BEC(values[0])
    if kind == "qsc":
        return QSC(values[0])
    return IndelSub(*values)


def _parse_deletion(text: str) -> DeletionProfile:
    kind, _, arg = text.partition(":")
    try:
        if kind == "zero":
            return NoDeletion()
        if kind == "const":
            return ConstDeletion(float(arg))
        if kind == "exp":
            return ExpDeletion(float(arg))
    except ValueError as e:
        raise SpecParseError(f"bad deletion profile {text!r}") from e
    raise SpecParseError(f"unknown deletion profile {text!r}")


def parse_torn(text: str, n: Optional[int] = None) -> TornSpec:
    """
    Parse ``geom:p``, ``fixed:ell`` or ``unif:gamma``, optionally followed by
    ``,del=zero|const:eps|exp:gamma_d`` and ``,direct`` to disable the 1/log n scaling.
    """
    head, *options = [part.strip() for part in text.strip().split(",")]
    kind, _, arg = head.partition(":")
    deletion: DeletionProfile = NoDeletion()
    scaled = True
    for option in options:
        if option.startswith("del="):
            deletion = _parse_deletion(option[4:])
        elif option == "direct":
            scaled = False
        else:
            raise SpecParseError(f"unknown torn-paper option {option!r}")
    try:
        if kind == "geom":
            law: LengthLaw = GeometricTear(float(arg))
        elif kind == "fixed":
            law = FixedTear(int(arg))
        elif kind == "unif":
            law = UniformTear(float(arg))
        else:
            raise SpecParseError(f"unknown tearing law {kind!r}")
    except ShuffleLabError:
        raise
    except ValueError as e:
        raise SpecParseError(f"bad tearing parameter in {text!r}") from e
    return TornSpec(law, deletion, n, scaled)
