"""
Banded global alignment under unit edit costs.

Only cells with |i - j| <= band are filled; each row is computed with numpy,
the left-to-right gap chain resolved by a running minimum.
"""

from typing import List, NamedTuple, Optional, Tuple

import numpy as np

_FAR = 1 << 40


class Alignment(NamedTuple):
    """Optimal banded alignment of a against b."""

    distance: int
    matches: int
    # (i, j) per column; -1 marks a gap on that side
    columns: List[Tuple[int, int]]

    def match_fraction(self, len_a: int, len_b: int) -> float:
        longest = max(len_a, len_b)
        return 1.0 if longest == 0 else self.matches / longest


def _band_matrix(a: np.ndarray, b: np.ndarray, band: int, unknown: np.ndarray) -> np.ndarray:
    la, lb = len(a), len(b)
    D = np.full((la + 1, lb + 1), _FAR, dtype=np.int64)
    D[0, : min(lb, band) + 1] = np.arange(min(lb, band) + 1)
    for i in range(1, la + 1):
        lo, hi = max(0, i - band), min(lb, i + band)
        if lo > hi:
            continue
        js = np.arange(lo, hi + 1)
        best = D[i - 1, js] + 1
        inner = js >= 1
        jd = js[inner]
        cost = (b[jd - 1] != a[i - 1]) | unknown[i - 1]
        best[inner] = np.minimum(best[inner], D[i - 1, jd - 1] + cost)
        # D[i, j] = min(best[j], D[i, j-1] + 1) unrolled as a running minimum
        D[i, js] = js + np.minimum.accumulate(best - js)
    return D


def banded_align(a: np.ndarray, b: np.ndarray, band: int = 8, erasure: Optional[int] = None) -> Alignment:
    """
    Edit-distance alignment of two symbol arrays inside a diagonal band.

    The band is widened to the length difference so a path always exists.
    When ``erasure`` is given, an erased symbol matches nothing, not even
    another erasure.

    Args:
        a: Read symbols
        b: Reference symbols
        band: Half-width of the band around the main diagonal
        erasure: Symbol index of the erasure marker, if the reads carry erasures

    Returns:
        Alignment with distance, number of matched symbols and the column list
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    unknown = a == erasure if erasure is not None else np.zeros(len(a), dtype=bool)
    band = max(band, abs(len(a) - len(b)), 1)
    D = _band_matrix(a, b, band, unknown)

    i, j = len(a), len(b)
    matches = 0
    columns: List[Tuple[int, int]] = []
    while i > 0 or j > 0:
        here = D[i, j]
        if i > 0 and j > 0:
            same = bool(a[i - 1] == b[j - 1]) and not unknown[i - 1]
            if here == D[i - 1, j - 1] + (not same):
                matches += same
                columns.append((i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and here == D[i - 1, j] + 1:
            columns.append((i - 1, -1))
            i -= 1
        else:
            columns.append((-1, j - 1))
            j -= 1
    columns.reverse()
    return Alignment(int(D[len(a), len(b)]), matches, columns)
