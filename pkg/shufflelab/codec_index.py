"""
Index-based inner-outer codec for the shuffling-sampling channel.

Encoding: the message fills ``rows`` outer-code rows per block; column j of
block b becomes stored sequence n_O*b + j, holding the index followed by the
column's outer symbols, with the whole string inner-encoded.

Decoding: inner-decode every read, group by index, keep one candidate per
index, treat missing indices as erasures and outer-decode every row.
"""

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence as Seq, Tuple

import numpy as np

from .channel import NoiseSpec
from .errors import DomainError, LayoutError
from .inner_code import InnerCodeSpec, NoInner, bits_to_symbols, symbols_to_bits
from .outer_code import MAX_FIELD_BITS, OuterCodeSpec, field_bits_for, outer_decode, outer_encode
from .seqcore import Alphabet, ReadPool, RngLike, as_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexLayout:
    """
    Where everything sits in one stored sequence.

    Inner-code message bits are laid out as [index | rows * m payload bits | pad zeros].
    """

    M: int
    L: int
    alphabet: Alphabet
    outer: OuterCodeSpec
    inner: InnerCodeSpec
    index_bits: int
    rows: int
    pad_bits: int

    @classmethod
    def build(
        cls,
        M: int,
        L: int,
        outer: OuterCodeSpec,
        inner: Optional[InnerCodeSpec] = None,
        alphabet: Alphabet = Alphabet.BINARY,
        max_rows: Optional[int] = None,
    ) -> "IndexLayout":
        """
        Derive index width, outer rows and padding; raise LayoutError when they do not fit.

        Args:
            M: Number of stored sequences
            L: Sequence length in symbols
            outer: Outer code; n must divide M
            inner: Inner code (default uncoded)
            alphabet: Storage alphabet
            max_rows: Cap on outer rows; 0 gives an empty message
        """
        inner = inner or NoInner()
        if M < 1 or L < 1:
            raise LayoutError(f"need M >= 1 and L >= 1, got M={M}, L={L}")
        if M % outer.n:
            raise LayoutError(f"outer length n={outer.n} must divide M={M}")
        data_bits = inner.message_bits(L * alphabet.bits_per_symbol)
        index_bits = (M - 1).bit_length()
        payload_bits = data_bits - index_bits
        if payload_bits < 0:
            raise LayoutError(
                f"{data_bits} inner message bits cannot hold a {index_bits}-bit index"
            )
        rows = payload_bits // outer.m
        if max_rows is not None:
            rows = min(rows, max_rows)
        return cls(M, L, alphabet, outer, inner, index_bits, rows, payload_bits - rows * outer.m)

    @property
    def blocks(self) -> int:
        return self.M // self.outer.n

    @property
    def message_bits(self) -> int:
        return self.blocks * self.outer.k * self.rows * self.outer.m

    @property
    def inner_message_bits(self) -> int:
        return self.index_bits + self.rows * self.outer.m + self.pad_bits


def plan_index_code(
    M: int,
    L: int,
    rate: float,
    inner: Optional[InnerCodeSpec] = None,
    alphabet: Alphabet = Alphabet.BINARY,
    n_outer: Optional[int] = None,
    round_up: bool = False,
    field_bits: Optional[int] = None,
) -> IndexLayout:
    """
    Layout whose outer dimension k gives the rate closest to ``rate`` bits per stored symbol.

    Args:
        M: Number of stored sequences
        L: Sequence length
        rate: Target rate
        inner: Inner code
        alphabet: Storage alphabet
        n_outer: Outer block length (default M)
        round_up: Choose the smallest k reaching ``rate`` instead of the largest below it
        field_bits: Outer field width m (default the smallest field holding n_outer points)
    """
    n = n_outer or M
    if rate == 0:
        return IndexLayout.build(M, L, OuterCodeSpec(n, n, field_bits), inner, alphabet, max_rows=0)
    widest = IndexLayout.build(M, L, OuterCodeSpec(n, n, field_bits), inner, alphabet)
    per_column = widest.blocks * widest.rows * widest.outer.m
    if per_column == 0:
        raise LayoutError("the layout leaves no room for payload")
    exact = rate * M * L / per_column
    k = int(np.ceil(exact - 1e-9)) if round_up else int(np.floor(exact + 1e-9))
    k = min(max(k, 1), n)
    return IndexLayout.build(M, L, OuterCodeSpec(n, k, widest.outer.m), inner, alphabet)


def rate_of(
    layout: IndexLayout,
    outer: Optional[OuterCodeSpec] = None,
    inner: Optional[InnerCodeSpec] = None,
) -> float:
    """
    Design rate in message bits per stored symbol (inner failures not discounted).

    The layout already carries its outer and inner codes; passing either one
    rates the layout rebuilt around it instead.
    """
    if outer is not None or inner is not None:
        layout = IndexLayout.build(
            layout.M, layout.L, outer or layout.outer, inner or layout.inner, layout.alphabet
        )
    return layout.message_bits / (layout.M * layout.L)


# ============== Inner failure and outer sizing ==============


@dataclass(frozen=True)
class InnerFailureRate:
    """Per-read outcome frequencies of one inner code on one noise law."""

    inner: InnerCodeSpec
    erased: float
    wrong: float
    trials: int

    def outer_load(self, n: int, q0: float = 0.0) -> Tuple[float, float]:
        """
        Mean and standard deviation of e + 2s over one outer block of n sequences.

        A never-drawn sequence or a rejected read costs one erasure; a read
        decoded to the wrong bits costs one substitution.
        """
        p_erased = q0 + (1.0 - q0) * self.erased
        p_wrong = (1.0 - q0) * self.wrong
        mean = p_erased + 2.0 * p_wrong
        variance = p_erased + 4.0 * p_wrong - mean**2
        return n * mean, math.sqrt(max(n * variance, 0.0))


def measure_inner_failure(
    inner: InnerCodeSpec,
    L: int,
    noise: NoiseSpec,
    rng: RngLike,
    trials: int = 4000,
    alphabet: Alphabet = Alphabet.BINARY,
) -> InnerFailureRate:
    """
    Monte Carlo rejection and miscorrection rates of ``inner`` on single reads.

    Args:
        inner: Inner code filling L symbols
        L: Sequence length
        noise: Length-preserving noise law
        rng: RandomStream or Generator
        trials: Reads to simulate
        alphabet: Storage alphabet
    """
    if not noise.preserves_length:
        raise DomainError("inner failure is measured on length-preserving noise only")
    gen = as_generator(rng)
    bits = gen.integers(0, 2, size=(trials, inner.message_bits(L * alphabet.bits_per_symbol)), dtype=np.uint8)
    stored = bits_to_symbols(inner.encode(bits), alphabet)
    decoded = inner.decode(symbols_to_bits(noise.corrupt_matrix(stored, alphabet, gen), alphabet))
    wrong = decoded.ok & np.any(decoded.bits != bits, axis=1)
    result = InnerFailureRate(inner, float(np.mean(~decoded.ok)), float(np.mean(wrong)), trials)
    logger.debug(f"Inner failure of {inner}: erased {result.erased:.4f}, wrong {result.wrong:.4f}")
    return result


def packed_field_bits(M: int, L: int, inner: InnerCodeSpec, alphabet: Alphabet, n: int) -> int:
    """Outer field width that leaves the fewest payload bits as padding (smallest on ties)."""
    payload = inner.message_bits(L * alphabet.bits_per_symbol) - (M - 1).bit_length()
    widths = range(field_bits_for(n), MAX_FIELD_BITS + 1)
    return min(widths, key=lambda m: (payload % m if payload >= m else payload, m))


def plan_concatenated(
    M: int,
    L: int,
    rate: float,
    candidates: Seq[InnerCodeSpec],
    noise: NoiseSpec,
    rng: RngLike,
    alphabet: Alphabet = Alphabet.BINARY,
    q0: float = 0.0,
    n_outer: Optional[int] = None,
    round_up: bool = True,
    trials: int = 4000,
    margin: float = 3.0,
) -> Tuple[IndexLayout, InnerFailureRate]:
    """
    Choose the inner code and outer (n, k) for ``rate`` from measured inner failure rates.

    Every candidate is measured on ``noise``; its layout packs the payload into
    the outer field with the least padding and takes k from ``rate``.
    Candidates that cannot reach ``rate`` are skipped. Among the rest the one
    whose redundancy n - k exceeds the predicted e + 2s load by the most
    standard deviations wins.

    Raises:
        LayoutError: No candidate reaches the rate
    """
    gen = as_generator(rng)
    n = n_outer or M
    best: Optional[Tuple[float, IndexLayout, InnerFailureRate]] = None
    for inner in candidates:
        try:
            m = packed_field_bits(M, L, inner, alphabet, n)
            layout = plan_index_code(M, L, rate, inner, alphabet, n_outer, round_up, m)
        except LayoutError as e:
            logger.debug(f"Skipping inner code {inner}: {e}")
            continue
        if layout.rows == 0 or (round_up and rate_of(layout) < rate - 1e-12):
            continue
        measured = measure_inner_failure(inner, L, noise, gen, trials, alphabet)
        mean, std = measured.outer_load(n, q0)
        slack = (layout.outer.redundancy - mean) / max(std, 1e-9)
        logger.debug(f"{inner}: k={layout.outer.k}, m={layout.outer.m}, load {mean:.1f} +- {std:.1f}, slack {slack:.2f} sd")
        if best is None or slack > best[0]:
            best = (slack, layout, measured)
    if best is None:
        raise LayoutError(f"no inner code reaches rate {rate:.4f} at M={M}, L={L}")
    slack, layout, measured = best
    if slack < margin:
        logger.warning(
            f"Outer redundancy {layout.outer.redundancy} is only {slack:.2f} sd above the predicted load"
        )
    logger.info(f"Planned {layout.inner} with outer ({layout.outer.n}, {layout.outer.k}) over GF(2^{layout.outer.m})")
    return layout, measured


def bytes_to_bits(data: bytes) -> np.ndarray:
    """Most-significant bit first within every byte."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def _int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    return ((np.asarray(values, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    width = bits.shape[-1]
    if width == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    return bits.astype(np.int64) @ (1 << np.arange(width - 1, -1, -1, dtype=np.int64))


def encode(message: np.ndarray, layout: IndexLayout) -> ReadPool:
    """
    Encode ``message`` bits into M indexed sequences of length L.

    Raises:
        LayoutError: the message length differs from layout.message_bits
    """
    message = np.asarray(message, dtype=np.uint8)
    if message.size != layout.message_bits:
        raise LayoutError(f"message has {message.size} bits, layout carries {layout.message_bits}")
    outer, m = layout.outer, layout.outer.m
    payload = np.zeros((layout.M, layout.rows * m), dtype=np.uint8)
    if layout.rows:
        symbols = _bits_to_int(message.reshape(layout.blocks, layout.rows, outer.k, m))
        for b in range(layout.blocks):
            codewords = outer_encode(symbols[b], outer)  # (rows, n)
            columns = _int_to_bits(codewords.T.reshape(-1), m).reshape(outer.n, layout.rows * m)
            payload[b * outer.n : (b + 1) * outer.n] = columns
    inner_message = np.concatenate(
        [
            _int_to_bits(np.arange(layout.M), layout.index_bits),
            payload,
            np.zeros((layout.M, layout.pad_bits), dtype=np.uint8),
        ],
        axis=1,
    )
    codewords = layout.inner.encode(inner_message)
    return ReadPool.from_matrix(bits_to_symbols(codewords, layout.alphabet), layout.alphabet)


@dataclass
class CodecReport:
    """Result of one index-codec decode."""

    success: bool
    message: Optional[np.ndarray]
    index_status: List[str]
    read_status: List[str]
    erasures: int = 0
    substitutions: int = 0
    failure_reason: str = ""
    duplicates: int = 0
    counts: Dict[str, int] = field(default_factory=dict)


def _select_candidates(indices: np.ndarray, payloads: np.ndarray, corrections: np.ndarray) -> Dict[int, int]:
    """
    One read per index: fewest corrections, then the most frequent payload,
    then the smallest payload bytes.
    """
    groups: Dict[int, List[int]] = defaultdict(list)
    for read, idx in enumerate(indices):
        groups[int(idx)].append(read)
    chosen: Dict[int, int] = {}
    for idx, reads in groups.items():
        best = min(corrections[r] for r in reads)
        finalists = [r for r in reads if corrections[r] == best]
        tally = Counter(payloads[r].tobytes() for r in finalists)
        top = max(tally.values())
        winner = min(key for key, count in tally.items() if count == top)
        chosen[idx] = next(r for r in finalists if payloads[r].tobytes() == winner)
    return chosen


def decode(reads: ReadPool, layout: IndexLayout) -> CodecReport:
    """
    Recover the message from an unordered pool of channel outputs.

    Reads of the wrong length (indel outputs) are dropped; reads whose inner
    decoding fails or whose index is out of range are ignored. Never returns
    a message unless every outer row decoded within its e + 2s budget.
    """
    M, L = layout.M, layout.L
    read_status = ["wrong_length"] * len(reads)
    keep = [i for i, r in enumerate(reads) if len(r) == L]
    if keep:
        matrix = np.stack([reads[i].array for i in keep])
        decoded = layout.inner.decode(symbols_to_bits(matrix, layout.alphabet))
        indices = _bits_to_int(decoded.bits[:, : layout.index_bits])
        payloads = decoded.bits[:, layout.index_bits : layout.index_bits + layout.rows * layout.outer.m]
        usable = decoded.ok & (indices < M)
        for local, read in enumerate(keep):
            if not decoded.ok[local]:
                read_status[read] = "inner_failure"
            elif indices[local] >= M:
                read_status[read] = "bad_index"
            else:
                read_status[read] = "ok"
        rows_ok = np.flatnonzero(usable)
        chosen_local = _select_candidates(indices[rows_ok], payloads[rows_ok], decoded.corrections[rows_ok])
        chosen = {idx: int(rows_ok[r]) for idx, r in chosen_local.items()}
    else:
        payloads = np.zeros((0, layout.rows * layout.outer.m), dtype=np.uint8)
        chosen = {}

    index_status = ["ok" if i in chosen else "erased" for i in range(M)]
    counts = dict(Counter(read_status))
    duplicates = counts.get("ok", 0) - len(chosen)
    logger.debug(f"Decode: {len(reads)} reads, {len(chosen)}/{M} indices recovered, status {counts}")

    outer, m = layout.outer, layout.outer.m
    if layout.rows == 0:
        return CodecReport(True, np.zeros(0, dtype=np.uint8), index_status, read_status, duplicates=duplicates, counts=counts)

    message_blocks = []
    erasures = substitutions = 0
    for b in range(layout.blocks):
        received = np.zeros((layout.rows, outer.n), dtype=np.int64)
        erased = np.ones(outer.n, dtype=bool)
        for j in range(outer.n):
            read = chosen.get(b * outer.n + j)
            if read is not None:
                received[:, j] = _bits_to_int(payloads[read].reshape(layout.rows, m))
                erased[j] = False
        result = outer_decode(received, erased, outer)
        erasures += result.erasures
        substitutions += result.substitutions
        if not result.success:
            reason = f"block {b}: {result.reason}"
            logger.info(f"Index decode failed ({reason})")
            return CodecReport(
                False, None, index_status, read_status, erasures, substitutions, reason, duplicates, counts
            )
        message_blocks.append(_int_to_bits(result.data.reshape(-1), m).reshape(-1))
    message = np.concatenate(message_blocks)
    return CodecReport(True, message, index_status, read_status, erasures, substitutions, "", duplicates, counts)
