"""
Inner codes protecting each stored sequence, plus bit/symbol packing.

Bit arrays are uint8 with values 0, 1 and ERASED_BIT for an erased
position. Decoders work on a whole (N, n) batch of reads at once and
report, per read, the decoded bits, the number of corrected bit errors and
whether decoding succeeded.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import List, NamedTuple, Tuple

import galois
import numpy as np

from .errors import LayoutError, SpecParseError
from .gf2 import GF2
from .seqcore import Alphabet

logger = logging.getLogger(__name__)

ERASED_BIT = 2


def symbols_to_bits(symbols: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    """
    Unpack an (N, L) symbol matrix into (N, L * bits_per_symbol) bits, most significant first.

    An erased symbol erases all of its bits.
    """
    symbols = np.asarray(symbols, dtype=np.uint8)
    width = alphabet.bits_per_symbol
    erased = symbols == alphabet.erasure
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint8)
    bits = (symbols[..., None] >> shifts) & 1
    bits[erased] = ERASED_BIT
    return bits.reshape(*symbols.shape[:-1], symbols.shape[-1] * width).astype(np.uint8)


def bits_to_symbols(bits: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    """Pack (N, L * bits_per_symbol) clean bits back into an (N, L) symbol matrix."""
    bits = np.asarray(bits, dtype=np.uint8)
    width = alphabet.bits_per_symbol
    if bits.shape[-1] % width:
        raise LayoutError(f"{bits.shape[-1]} bits do not pack into {width}-bit symbols")
    grouped = bits.reshape(*bits.shape[:-1], bits.shape[-1] // width, width)
    weights = (1 << np.arange(width - 1, -1, -1)).astype(np.uint8)
    return (grouped * weights).sum(axis=-1).astype(np.uint8)


class InnerDecoded(NamedTuple):
    bits: np.ndarray
    corrections: np.ndarray
    ok: np.ndarray


class InnerCodeSpec(ABC):
    """Binary block code applied to the index and payload of every sequence."""

    @abstractmethod
    def message_bits(self, codeword_bits: int) -> int:
        """Data bits carried by a codeword of ``codeword_bits`` bits; LayoutError if it cannot fit."""

    @abstractmethod
    def encode(self, bits: np.ndarray) -> np.ndarray:
        """(N, k) bits -> (N, n) codewords."""

    @abstractmethod
    def decode(self, received: np.ndarray) -> InnerDecoded:
        """(N, n) received bits, possibly erased -> decoded batch."""

    def rate(self, codeword_bits: int) -> float:
        return self.message_bits(codeword_bits) / codeword_bits


@dataclass(frozen=True)
class NoInner(InnerCodeSpec):
    """Uncoded; any erased bit makes the read unusable."""

    def message_bits(self, codeword_bits: int) -> int:
        return codeword_bits

    def encode(self, bits):
        return np.asarray(bits, dtype=np.uint8).copy()

    def decode(self, received):
        received = np.asarray(received, dtype=np.uint8)
        ok = ~np.any(received == ERASED_BIT, axis=1)
        bits = np.where(received == ERASED_BIT, 0, received).astype(np.uint8)
        return InnerDecoded(bits, np.zeros(len(received), dtype=np.int64), ok)


@dataclass(frozen=True)
class Repetition(InnerCodeSpec):
    """Every bit sent r times in a row; majority vote over the non-erased copies."""

    r: int

    def __post_init__(self):
        if self.r < 1:
            raise LayoutError(f"repetition factor must be >= 1, got {self.r}")

    def message_bits(self, codeword_bits: int) -> int:
        if codeword_bits % self.r:
            raise LayoutError(f"{codeword_bits} bits are not a multiple of repetition {self.r}")
        return codeword_bits // self.r

    def encode(self, bits):
        return np.repeat(np.asarray(bits, dtype=np.uint8), self.r, axis=1)

    def decode(self, received):
        received = np.asarray(received, dtype=np.uint8)
        N, n = received.shape
        copies = received.reshape(N, n // self.r, self.r)
        ones = (copies == 1).sum(axis=2)
        zeros = (copies == 0).sum(axis=2)
        bits = (ones > zeros).astype(np.uint8)
        # a tie (including all copies erased) leaves the bit undecided
        ok = ~np.any(ones == zeros, axis=1)
        corrections = np.minimum(ones, zeros).sum(axis=1).astype(np.int64)
        return InnerDecoded(bits, corrections, ok)


@dataclass(frozen=True)
class ParityProduct(InnerCodeSpec):
    """
    rows x cols data bits with a parity bit per row, per column and a corner bit.

    Every row and column of the (rows+1) x (cols+1) codeword has even parity,
    so one bit error is located by its row and column syndromes and two are
    detected. Erasures are filled by peeling rows and columns that hold a
    single erased bit.
    """

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise LayoutError(f"parity product needs rows, cols >= 1, got {self.rows}x{self.cols}")

    @property
    def codeword_length(self) -> int:
        return (self.rows + 1) * (self.cols + 1)

    def message_bits(self, codeword_bits: int) -> int:
        if codeword_bits != self.codeword_length:
            raise LayoutError(
                f"parity product {self.rows}x{self.cols} needs {self.codeword_length} bits, "
                f"the sequence holds {codeword_bits}"
            )
        return self.rows * self.cols

    def encode(self, bits):
        bits = np.asarray(bits, dtype=np.uint8)
        N = bits.shape[0]
        grid = np.zeros((N, self.rows + 1, self.cols + 1), dtype=np.uint8)
        grid[:, : self.rows, : self.cols] = bits.reshape(N, self.rows, self.cols)
        grid[:, : self.rows, self.cols] = grid[:, : self.rows, : self.cols].sum(axis=2) % 2
        grid[:, self.rows, :] = grid[:, : self.rows, :].sum(axis=1) % 2
        return grid.reshape(N, -1)

    def _peel(self, grid: np.ndarray) -> None:
        """Fill erasures in place wherever a row or column holds exactly one."""
        for _ in range(self.rows + self.cols + 2):
            changed = False
            for axis in (2, 1):
                erased = grid == ERASED_BIT
                if not erased.any():
                    return
                parity = np.expand_dims(np.where(erased, 0, grid).sum(axis=axis) % 2, axis)
                single = np.expand_dims(erased.sum(axis=axis) == 1, axis)
                target = erased & single
                if target.any():
                    grid[target] = np.broadcast_to(parity, grid.shape)[target]
                    changed = True
            if not changed:
                return

    def decode(self, received):
        received = np.asarray(received, dtype=np.uint8)
        N = received.shape[0]
        grid = received.reshape(N, self.rows + 1, self.cols + 1).copy()
        self._peel(grid)
        unfilled = np.any(grid == ERASED_BIT, axis=(1, 2))
        grid[grid == ERASED_BIT] = 0

        row_syn = grid.sum(axis=2) % 2
        col_syn = grid.sum(axis=1) % 2
        n_rows = row_syn.sum(axis=1)
        n_cols = col_syn.sum(axis=1)
        clean = (n_rows == 0) & (n_cols == 0)
        single = (n_rows == 1) & (n_cols == 1)
        idx = np.flatnonzero(single & ~unfilled)
        grid[idx, row_syn[idx].argmax(axis=1), col_syn[idx].argmax(axis=1)] ^= 1

        ok = (clean | single) & ~unfilled
        corrections = single.astype(np.int64)
        bits = grid[:, : self.rows, : self.cols].reshape(N, -1)
        return InnerDecoded(bits, corrections, ok)


@lru_cache(maxsize=None)
def _secded_tables(length: int) -> Tuple[galois.FieldArray, galois.FieldArray, np.ndarray, np.ndarray]:
    """Data-to-check matrix, extended parity-check matrix, syndrome weights and syndrome -> position."""
    r = (length - 1).bit_length()
    k = length - 1 - r
    # check bits sit on the unit columns, data bits on the first k other nonzero columns
    data_columns = [c for c in range(1, 1 << r) if c & (c - 1)][:k]
    columns = np.array(data_columns + [1 << j for j in range(r)])
    H = (columns[None, :] >> np.arange(r)[:, None]) & 1
    H_ext = np.ones((r + 1, length), dtype=np.uint8)
    H_ext[:r, : length - 1] = H
    H_ext[:r, length - 1] = 0
    weights = 1 << np.arange(r + 1)
    position = np.full(1 << (r + 1), -1, dtype=np.int64)
    position[weights @ H_ext] = np.arange(length)
    return GF2(H[:, :k].T.astype(np.uint8)), GF2(H_ext), weights, position


@dataclass(frozen=True)
class ExtendedHamming(InnerCodeSpec):
    """
    Shortened Hamming code plus an overall parity bit (SEC-DED) filling ``length`` bits.

    Codewords are laid out as [data | checks | overall parity]. One bit error
    is corrected and two are detected; up to three erased bits are filled, or
    one erased bit together with one bit error.
    """

    length: int

    def __post_init__(self):
        if self.length < 4:
            raise LayoutError(f"extended Hamming code needs at least 4 bits, got {self.length}")

    @property
    def check_bits(self) -> int:
        return (self.length - 1).bit_length()

    def message_bits(self, codeword_bits: int) -> int:
        if codeword_bits != self.length:
            raise LayoutError(
                f"extended Hamming code of length {self.length} does not fill {codeword_bits} bits"
            )
        return self.length - 1 - self.check_bits

    def encode(self, bits):
        P, _, _, _ = _secded_tables(self.length)
        data = np.asarray(bits, dtype=np.uint8)
        checks = (GF2(data) @ P).view(np.ndarray).astype(np.uint8)
        body = np.concatenate([data, checks], axis=1)
        return np.concatenate([body, body.sum(axis=1, keepdims=True) % 2], axis=1).astype(np.uint8)

    def _syndromes(self, words: np.ndarray) -> np.ndarray:
        _, H_ext, weights, _ = _secded_tables(self.length)
        return (GF2(words) @ H_ext.T).view(np.ndarray).astype(np.int64) @ weights

    def _fill(self, word: np.ndarray, erased: np.ndarray) -> Tuple[np.ndarray, int, bool]:
        """Try every completion of the erased bits; distance 4 keeps a zero-syndrome completion unique."""
        _, _, _, position = _secded_tables(self.length)
        where = np.flatnonzero(erased)
        fills = (np.arange(1 << len(where))[:, None] >> np.arange(len(where))) & 1
        words = np.repeat(word[None, :], len(fills), axis=0)
        words[:, where] = fills
        syndromes = self._syndromes(words)
        valid = np.flatnonzero(syndromes == 0)
        if len(valid):
            return words[valid[0]], 0, True
        if len(where) == 1:
            located = position[syndromes]
            hit = np.flatnonzero(located >= 0)
            if len(hit):
                fixed = words[hit[0]].copy()
                fixed[located[hit[0]]] ^= 1
                return fixed, 1, True
        return word, 0, False

    def decode(self, received):
        _, _, _, position = _secded_tables(self.length)
        received = np.asarray(received, dtype=np.uint8)
        N = received.shape[0]
        k = self.message_bits(self.length)
        erased = received == ERASED_BIT
        n_erased = erased.sum(axis=1)
        words = np.where(erased, 0, received).astype(np.uint8)
        syndromes = self._syndromes(words)
        located = position[syndromes]

        clean = n_erased == 0
        single = clean & (syndromes != 0) & (located >= 0)
        rows = np.flatnonzero(single)
        words[rows, located[rows]] ^= 1
        ok = clean & ((syndromes == 0) | single)
        corrections = single.astype(np.int64)

        for i in np.flatnonzero((n_erased > 0) & (n_erased <= 3)):
            words[i], corrections[i], ok[i] = self._fill(words[i], erased[i])
        return InnerDecoded(words[:, :k], corrections, ok)


def parse_inner(text: str) -> InnerCodeSpec:
    """Parse ``none``, ``rep:r``, ``parity:rows,cols`` or ``hamming:length``."""
    kind, _, args = text.strip().lower().partition(":")
    try:
        if kind == "none":
            return NoInner()
        if kind == "rep":
            return Repetition(int(args))
        if kind == "parity":
            rows, cols = (int(a) for a in args.split(","))
            return ParityProduct(rows, cols)
        if kind == "hamming":
            return ExtendedHamming(int(args))
    except ValueError as e:
        if isinstance(e, LayoutError):
            raise
        raise SpecParseError(f"bad inner code spec {text!r}") from e
    raise SpecParseError(f"unknown inner code {kind!r}")


def candidate_inner_codes(codeword_bits: int) -> List[InnerCodeSpec]:
    """Every inner code of this module that exactly fills ``codeword_bits`` bits."""
    candidates: List[InnerCodeSpec] = [NoInner()]
    candidates += [Repetition(r) for r in (2, 3) if codeword_bits % r == 0]
    for rows in range(2, codeword_bits):
        width, rest = divmod(codeword_bits, rows + 1)
        if rest == 0 and width - 1 >= rows:
            candidates.append(ParityProduct(rows, width - 1))
    if codeword_bits >= 4:
        candidates.append(ExtendedHamming(codeword_bits))
    return candidates
