"""
Systematic evaluation-style Reed-Solomon outer code over GF(2^m).

A data row d_0..d_{k-1} defines the polynomial f of degree < k with
f(i) = d_i; the codeword is (f(0), ..., f(n-1)). Any e erasures and s
substitutions with e + 2s <= n - k are corrected: erasures by interpolation
through surviving positions, substitutions by Berlekamp-Welch. Field
arithmetic, polynomials and matrix inverses come from ``galois``.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Set, Tuple, Type

import galois
import numpy as np

from .errors import LayoutError, SingularSystemError
from .gf2 import solve_system

logger = logging.getLogger(__name__)

MAX_FIELD_BITS = 16


@lru_cache(maxsize=None)
def gf(m: int) -> Type[galois.FieldArray]:
    """GF(2^m) array class for 1 <= m <= 16."""
    if not 1 <= m <= MAX_FIELD_BITS:
        raise LayoutError(f"GF(2^m) supported for 1 <= m <= {MAX_FIELD_BITS}, got m={m}")
    return galois.GF(2**m)


def field_bits_for(n: int) -> int:
    """Smallest m with 2^m >= n."""
    return max(1, (n - 1).bit_length())


def vandermonde(points: galois.FieldArray, columns: int) -> galois.FieldArray:
    """V[j, t] = points[j]^t."""
    GF = type(points)
    V = GF.Ones((len(points), columns))
    for t in range(1, columns):
        V[:, t] = V[:, t - 1] * points
    return V


@dataclass(frozen=True)
class OuterCodeSpec:
    """(n, k) MDS code over GF(2^m); m defaults to the smallest field holding n points."""

    n: int
    k: int
    m: Optional[int] = None

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise LayoutError(f"outer code needs 1 <= k <= n, got ({self.n}, {self.k})")
        if self.m is None:
            object.__setattr__(self, "m", field_bits_for(self.n))
        if (1 << self.m) < self.n:
            raise LayoutError(f"GF(2^{self.m}) has fewer than n={self.n} evaluation points")

    @property
    def field(self) -> Type[galois.FieldArray]:
        return gf(self.m)

    @property
    def redundancy(self) -> int:
        return self.n - self.k


@lru_cache(maxsize=64)
def _generator(n: int, k: int, m: int) -> galois.FieldArray:
    """k x n systematic generator: column j holds the Lagrange weights of f(j) on f(0..k-1)."""
    GF = gf(m)
    # coefficients = V_k^-1 d, codeword = V_n coefficients
    V_k = vandermonde(GF(np.arange(k)), k)
    V_n = vandermonde(GF(np.arange(n)), k)
    return (V_n @ np.linalg.inv(V_k)).T


def _as_ints(array: galois.FieldArray) -> np.ndarray:
    return array.view(np.ndarray).astype(np.int64)


def outer_encode(data: np.ndarray, spec: OuterCodeSpec) -> np.ndarray:
    """
    Encode each row of ``data``.

    Args:
        data: (rows, k) field symbols
        spec: Outer code

    Returns:
        (rows, n) codewords whose first k columns equal ``data``
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.int64))
    if data.shape[1] != spec.k:
        raise LayoutError(f"expected {spec.k} data symbols per row, got {data.shape[1]}")
    if data.size and (data.min() < 0 or data.max() >= (1 << spec.m)):
        raise LayoutError(f"symbol out of range for GF(2^{spec.m})")
    return _as_ints(spec.field(data) @ _generator(spec.n, spec.k, spec.m))


@dataclass(eq=False)
class OuterDecodeResult:
    """Outcome of decoding every row of one outer-code block."""

    data: np.ndarray
    success: bool
    erasures: int
    substitutions: int = 0
    failed_rows: List[int] = field(default_factory=list)
    reason: str = ""
    error_columns: List[int] = field(default_factory=list)


def _berlekamp_welch(xs: galois.FieldArray, ys: galois.FieldArray, k: int) -> Optional[galois.Poly]:
    """The degree < k polynomial within (len(xs)-k)//2 mismatches of ys, or None."""
    GF = type(xs)
    s = (len(xs) - k) // 2
    if s == 0:
        return None
    V = vandermonde(xs, k + s + 1)
    # Q(x) + y E(x) = y x^s with E monic of degree s (characteristic 2: minus is plus)
    A = GF.Zeros((len(xs), k + 2 * s))
    A[:, : k + s] = V[:, : k + s]
    A[:, k + s :] = ys[:, None] * V[:, :s]
    try:
        solution, _ = solve_system(A, ys * V[:, s])
    except SingularSystemError:
        return None
    Q = galois.Poly(solution[: k + s], order="asc")
    E = galois.Poly(np.concatenate([solution[k + s :].view(np.ndarray), [1]]), field=GF, order="asc")
    f, remainder = divmod(Q, E)
    if np.any(remainder.coeffs != 0) or f.degree >= k:
        return None
    if np.count_nonzero(f(xs) != ys) > s:
        return None
    return f


def _decode_rows(
    received: np.ndarray, erased: np.ndarray, spec: OuterCodeSpec
) -> Tuple[np.ndarray, List[int], int, Set[int]]:
    """(data, failed rows, most substitutions in a row, columns found in error) for rows sharing ``erased``."""
    GF = spec.field
    rows = received.shape[0]
    data = np.zeros((rows, spec.k), dtype=np.int64)
    survivors = np.flatnonzero(~erased)
    if len(survivors) < spec.k:
        return data, list(range(rows)), 0, set()

    xs = GF(survivors)
    ys = GF(received[:, survivors])
    coeffs = np.linalg.inv(vandermonde(xs[: spec.k], spec.k)) @ ys[:, : spec.k].T
    predicted = (vandermonde(xs, spec.k) @ coeffs).T
    consistent = np.all(_as_ints(predicted) == _as_ints(ys), axis=1)
    data[:] = _as_ints((vandermonde(GF(np.arange(spec.k)), spec.k) @ coeffs).T)

    failed: List[int] = []
    worst = 0
    wrong: Set[int] = set()
    for r in np.flatnonzero(~consistent):
        f = _berlekamp_welch(xs, ys[r], spec.k)
        if f is None:
            failed.append(int(r))
            continue
        mismatched = survivors[_as_ints(f(xs)) != _as_ints(ys[r])]
        worst = max(worst, len(mismatched))
        wrong.update(int(j) for j in mismatched)
        data[r] = _as_ints(f(GF(np.arange(spec.k))))
    return data, failed, worst, wrong


def outer_decode(received: np.ndarray, erased: np.ndarray, spec: OuterCodeSpec) -> OuterDecodeResult:
    """
    Decode every row of a block whose columns ``erased`` are missing.

    Rows are first interpolated through the first k surviving positions; rows
    whose interpolant disagrees with another survivor fall back to
    Berlekamp-Welch. Columns found in error in a decoded row are then erased
    for the rows that failed, which retry once. A row that cannot be made
    consistent within the e + 2s <= n - k budget is reported as failed,
    never guessed.

    Args:
        received: (rows, n) symbols; values at erased columns are ignored
        erased: (n,) boolean mask of missing columns
        spec: Outer code

    Returns:
        OuterDecodeResult with the (rows, k) data
    """
    received = np.atleast_2d(np.asarray(received, dtype=np.int64))
    erased = np.asarray(erased, dtype=bool)
    e = int(erased.sum())
    data, failed, worst, wrong = _decode_rows(received, erased, spec)

    if failed and wrong:
        widened = erased.copy()
        widened[sorted(wrong)] = True
        retry, still_failed, retry_worst, retry_wrong = _decode_rows(received[failed], widened, spec)
        logger.debug(
            f"Outer retry: {len(failed)} row(s) with {len(wrong)} known-bad columns erased, "
            f"{len(failed) - len(still_failed)} recovered"
        )
        lost = set(still_failed)
        recovered = [i for i in range(len(failed)) if i not in lost]
        data[[failed[i] for i in recovered]] = retry[recovered]
        worst = max(worst, retry_worst)
        wrong |= retry_wrong
        failed = [failed[i] for i in still_failed]

    if failed:
        reason = f"{len(failed)} row(s) beyond e + 2s <= {spec.redundancy} with e = {e}"
        logger.debug(f"Outer decode failed: {reason}")
        return OuterDecodeResult(data, False, e, worst, failed, reason, sorted(wrong))
    return OuterDecodeResult(data, True, e, worst, error_columns=sorted(wrong))
