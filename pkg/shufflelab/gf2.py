"""
Linear systems over galois field arrays, and the GF(2) matrices of the linear scheme.

Row reduction, rank and products come from the ``galois`` package; this
module only adds the bookkeeping the decoders need (consistency check, one
solution with free variables at zero, rank of the coefficient part).
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import galois
import numpy as np

from .errors import SingularSystemError

GF2 = galois.GF(2)


def pack_bits(bits: Sequence[int]) -> int:
    """Bit j of the result is bits[j]."""
    arr = np.asarray(bits, dtype=np.uint8)
    return int.from_bytes(np.packbits(arr, bitorder="little").tobytes(), "little")


def unpack_bits(value: int, width: int) -> np.ndarray:
    """Inverse of pack_bits for a fixed width."""
    raw = np.frombuffer(value.to_bytes((width + 7) // 8 or 1, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:width]


def solve_system(A: galois.FieldArray, b: galois.FieldArray) -> Tuple[galois.FieldArray, int]:
    """
    One solution of A x = b over the field of ``A``.

    Args:
        A: (rows, cols) coefficient matrix
        b: (rows,) right-hand side in the same field

    Returns:
        (solution with free variables set to 0, rank of A)

    Raises:
        SingularSystemError: The system is inconsistent
    """
    field = type(A)
    rows, cols = A.shape
    x = field.Zeros(cols)
    if rows == 0:
        return x, 0
    augmented = field.Zeros((rows, cols + 1))
    augmented[:, :cols] = A
    augmented[:, cols] = b
    reduced = augmented.row_reduce(ncols=cols)
    rank = 0
    for row in reduced.view(np.ndarray):
        pivots = np.flatnonzero(row[:cols])
        if len(pivots) == 0:
            if row[cols]:
                raise SingularSystemError("inconsistent system")
            continue
        x[pivots[0]] = row[cols]
        rank += 1
    return x, rank


@dataclass(frozen=True, eq=False)
class BinaryMatrix:
    """rows x cols matrix over GF(2)."""

    array: galois.FieldArray

    @property
    def n_rows(self) -> int:
        return self.array.shape[0]

    @property
    def n_cols(self) -> int:
        return self.array.shape[1]

    @classmethod
    def from_array(cls, array) -> "BinaryMatrix":
        return cls(GF2(np.atleast_2d(np.asarray(array, dtype=np.uint8)) & 1))

    @classmethod
    def random(cls, n_rows: int, n_cols: int, gen: np.random.Generator) -> "BinaryMatrix":
        """I.i.d. fair-coin entries."""
        return cls(GF2.Random((n_rows, n_cols), seed=gen))

    def to_array(self) -> np.ndarray:
        return self.array.view(np.ndarray).astype(np.uint8)

    def packed_rows(self) -> Tuple[int, ...]:
        return tuple(pack_bits(row) for row in self.to_array())

    def select(self, indices: Iterable[int]) -> "BinaryMatrix":
        return BinaryMatrix(self.array[list(indices)].reshape(-1, self.n_cols))

    def matvec(self, vector) -> np.ndarray:
        """Bit i of the result is <row_i, vector>."""
        return (self.array @ GF2(np.asarray(vector, dtype=np.uint8))).view(np.ndarray).astype(np.uint8)

    def rank(self) -> int:
        if self.n_rows == 0 or self.n_cols == 0:
            return 0
        return int(np.linalg.matrix_rank(self.array))

    def solve(self, y) -> Tuple[Optional[np.ndarray], int]:
        """
        One solution of A t = y.

        Args:
            y: Right-hand side bits, one per row

        Returns:
            (solution bits with free variables set to 0, or None if inconsistent; rank of A)
        """
        try:
            solution, rank = solve_system(self.array, GF2(np.asarray(y, dtype=np.uint8)))
        except SingularSystemError:
            return None, self.rank()
        return solution.view(np.ndarray).astype(np.uint8), rank
