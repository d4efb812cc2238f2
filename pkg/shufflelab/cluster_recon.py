"""
Read clustering and trace reconstruction for noisy multi-draw pools.

Pipeline: pseudorandomize the inputs, send them through the channel, shingle
every read into k-mers, MinHash the shingle sets, pair reads that share an
LSH band, drop pairs whose banded alignment is poor, join the remaining
pairs into clusters and reconstruct one sequence per cluster by voting.
"""

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence as Seq, Set, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .alignment import banded_align
from .errors import ContractViolation, DomainError
from .seqcore import Alphabet, RandomStream, ReadPool, Sequence
from .settings import LabSettings

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]

_EMPTY_SIGNATURE = np.iinfo(np.uint64).max


# ============== Pseudorandomization ==============


def _mask(seed: int, length: int, alphabet: Alphabet) -> np.ndarray:
    gen = RandomStream(seed, "randomize").generator()
    return gen.integers(0, alphabet.size, size=length, dtype=np.int64)


def _shift_pool(pool: ReadPool, seed: int, length: Optional[int], sign: int) -> ReadPool:
    if length is None:
        length = max((len(r) for r in pool), default=0)
    mask = _mask(seed, length, pool.alphabet)
    size, erasure = pool.alphabet.size, pool.alphabet.erasure
    reads = []
    for read in pool:
        x = read.array.astype(np.int64)
        n = min(len(x), length)
        head = x[:n]
        shifted = np.where(head == erasure, erasure, (head + sign * mask[:n]) % size)
        reads.append(Sequence.from_array(np.concatenate([shifted, x[n:]]), pool.alphabet))
    return ReadPool(tuple(reads), pool.alphabet, pool.ordered, pool.fixed_length)


def randomize(pool: ReadPool, seed: int, length: Optional[int] = None) -> ReadPool:
    """
    Add one seed-derived mask to every sequence, position by position, modulo the alphabet size.

    Erasures pass through. ``length`` fixes the mask length (default: the
    longest read); positions past it are left alone.
    """
    return _shift_pool(pool, seed, length, +1)


def derandomize(pool: ReadPool, seed: int, length: Optional[int] = None) -> ReadPool:
    """Inverse of randomize for the same seed and mask length."""
    return _shift_pool(pool, seed, length, -1)


# ============== Shingles and MinHash ==============


@dataclass(frozen=True)
class ShingleSet:
    """Distinct k-mers of a read, each coded as an integer in base |alphabet| + 1."""

    k: int
    alphabet: Alphabet
    codes: FrozenSet[int]

    def __len__(self) -> int:
        return len(self.codes)

    def texts(self) -> Set[str]:
        base = self.alphabet.size + 1
        chars = self.alphabet.chars + "?"
        out = set()
        for code in self.codes:
            digits = []
            for _ in range(self.k):
                code, d = divmod(code, base)
                digits.append(chars[d])
            out.add("".join(reversed(digits)))
        return out


def kmer_shingles(seq: Sequence, k: int) -> ShingleSet:
    """All length-k substrings of ``seq``; empty when the read is shorter than k."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    base = seq.alphabet.size + 1
    if k * np.log2(base) >= 63:
        raise DomainError(f"k={k} k-mers do not fit a 64-bit code")
    if len(seq) < k:
        return ShingleSet(k, seq.alphabet, frozenset())
    windows = sliding_window_view(seq.array.astype(np.int64), k)
    codes = windows @ (base ** np.arange(k - 1, -1, -1, dtype=np.int64))
    return ShingleSet(k, seq.alphabet, frozenset(codes.tolist()))


def jaccard(a: ShingleSet, b: ShingleSet) -> float:
    """|a & b| / |a | b|, 1.0 for two empty sets."""
    union = len(a.codes | b.codes)
    return 1.0 if union == 0 else len(a.codes & b.codes) / union


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def hash_salts(h: int, seed: int) -> np.ndarray:
    """Per-function salts of the seeded hash family."""
    return _splitmix64(np.uint64(seed % 2**64) + np.arange(h, dtype=np.uint64) * np.uint64(0xD1B54A32D192ED03))


class MinHashSignature(NamedTuple):
    values: np.ndarray
    empty: bool

    def agreement(self, other: "MinHashSignature") -> float:
        """Fraction of equal coordinates; an estimate of the Jaccard similarity."""
        if self.empty or other.empty:
            return 0.0
        return float(np.mean(self.values == other.values))


def minhash(shingles: ShingleSet, h: int, seed: int) -> MinHashSignature:
    """
    h-coordinate MinHash signature.

    Coordinate i is the minimum over shingles of splitmix64(code xor salt_i).
    An empty set yields a sentinel signature flagged ``empty`` that never pairs.
    """
    if not shingles.codes:
        return MinHashSignature(np.full(h, _EMPTY_SIGNATURE, dtype=np.uint64), True)
    codes = np.fromiter(shingles.codes, dtype=np.uint64, count=len(shingles.codes))
    hashed = _splitmix64(codes[None, :] ^ hash_salts(h, seed)[:, None])
    return MinHashSignature(hashed.min(axis=1), False)


# ============== Candidate pairs ==============


@dataclass(frozen=True)
class LshParams:
    """Shingle length, signature size, banding and the alignment filter."""

    k: int = 8
    h: int = 128
    bands: int = 64
    rows: int = 2
    band_width: int = 8
    tau: float = 0.75

    def __post_init__(self):
        if self.bands * self.rows != self.h:
            raise DomainError(f"bands x rows must equal h: {self.bands} x {self.rows} != {self.h}")
        if not 0.0 < self.tau <= 1.0:
            raise DomainError(f"tau must be in (0, 1], got {self.tau}")
        if self.k < 1 or self.band_width < 0:
            raise DomainError("k must be >= 1 and band_width >= 0")

    @classmethod
    def from_settings(cls, settings: LabSettings, alphabet: Alphabet) -> "LshParams":
        k = settings.lsh_k_binary if alphabet is Alphabet.BINARY else settings.lsh_k_quaternary
        return cls(
            k=k,
            h=settings.lsh_hashes,
            bands=settings.lsh_bands,
            rows=settings.lsh_rows,
            band_width=settings.align_band,
            tau=settings.match_threshold,
        )


def lsh_pairs(signatures: Seq[MinHashSignature], params: LshParams) -> Set[Pair]:
    """Pairs (i < j) whose signatures agree on every row of at least one band."""
    pairs: Set[Pair] = set()
    for band in range(params.bands):
        buckets: Dict[bytes, List[int]] = defaultdict(list)
        lo, hi = band * params.rows, (band + 1) * params.rows
        for i, sig in enumerate(signatures):
            if not sig.empty:
                buckets[sig.values[lo:hi].tobytes()].append(i)
        for members in buckets.values():
            for a in range(len(members)):
                for b in range(a + 1, len(members)):
                    pairs.add((members[a], members[b]))
    return pairs


def filter_pairs(pairs: Iterable[Pair], reads: ReadPool, params: LshParams) -> List[Pair]:
    """Keep pairs whose banded alignment matches at least a tau fraction of symbols."""
    kept = []
    for i, j in sorted(pairs):
        a, b = reads[i].array, reads[j].array
        alignment = banded_align(a, b, params.band_width, reads.alphabet.erasure)
        if alignment.match_fraction(len(a), len(b)) >= params.tau:
            kept.append((i, j))
    return kept


# ============== Clusters ==============


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Cluster id per read, ids contiguous from 0 in order of first appearance."""

    labels: np.ndarray

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def clusters(self) -> List[List[int]]:
        out: List[List[int]] = [[] for _ in range(self.n_clusters)]
        for read, label in enumerate(self.labels.tolist()):
            out[label].append(read)
        return out


def pairs_to_clusters(pairs: Iterable[Pair], N: int) -> ClusterAssignment:
    """Connected components of the pair graph by union-find with path compression."""
    parent = list(range(N))

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for i, j in pairs:
        if not (0 <= i < N and 0 <= j < N):
            raise ContractViolation(f"pair ({i}, {j}) outside {N} reads")
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    ids: Dict[int, int] = {}
    labels = np.empty(N, dtype=np.int64)
    for read in range(N):
        labels[read] = ids.setdefault(find(read), len(ids))
    return ClusterAssignment(labels)


# ============== Reconstruction ==============


def _plurality(matrix: np.ndarray, n_symbols: int) -> np.ndarray:
    """Column-wise most frequent value in 0..n_symbols-1, ties to the smallest; -1 where none."""
    counts = (matrix[None, :, :] == np.arange(n_symbols)[:, None, None]).sum(axis=1)
    winner = counts.argmax(axis=0)
    winner[counts.max(axis=0) == 0] = -1
    return winner


def _reconstruct_substitution(reads: Seq[Sequence], alphabet: Alphabet) -> Sequence:
    lengths = Counter(len(r) for r in reads)
    top = max(lengths.values())
    length = min(n for n, c in lengths.items() if c == top)
    matrix = np.stack([r.array for r in reads if len(r) == length])
    winner = _plurality(matrix, alphabet.size)
    winner[winner < 0] = alphabet.erasure
    return Sequence.from_array(winner, alphabet)


def _reconstruct_indel(reads: Seq[Sequence], alphabet: Alphabet, band: int) -> Sequence:
    order = sorted(range(len(reads)), key=lambda i: (len(reads[i]), reads[i].symbols))
    pivot = reads[order[(len(order) - 1) // 2]].array
    gap = alphabet.size + 1
    n = len(reads)
    # votes[r, c] is the symbol read r places on pivot column c (gap if none);
    # inserted[r, c] is the first symbol read r inserts just before pivot column c
    votes = np.full((n, len(pivot)), gap, dtype=np.int64)
    inserted = np.full((n, len(pivot) + 1), -1, dtype=np.int64)
    for r, read in enumerate(reads):
        x = read.array
        slot = 0
        for i, j in banded_align(x, pivot, band, alphabet.erasure).columns:
            if j >= 0:
                if i >= 0:
                    votes[r, j] = x[i]
                slot = j + 1
            elif inserted[r, slot] < 0:
                inserted[r, slot] = x[i]

    symbols = _plurality(votes, gap + 1)
    out: List[int] = []
    for c in range(len(pivot) + 1):
        column = inserted[:, c]
        if 2 * int((column >= 0).sum()) > n:
            out.append(int(_plurality(column[column >= 0][:, None], alphabet.size + 1)[0]))
        if c < len(pivot) and symbols[c] != gap:
            out.append(int(symbols[c]))
    return Sequence.from_array(np.asarray(out, dtype=np.uint8), alphabet)


def reconstruct(
    cluster: Seq[Sequence], alphabet: Alphabet, mode: str = "substitution", band: int = 8
) -> Sequence:
    """
    One estimate of the sequence behind a cluster of noisy reads.

    ``substitution``: column plurality over the reads of the most common
    length, erasures excluded, ties to the smallest symbol.
    ``indel``: the median-length read is the pivot; every read is aligned to
    it, each pivot column takes the plurality of aligned symbols or gaps, and
    an insertion shared by a majority of reads is kept.
    """
    if not cluster:
        raise ContractViolation("cannot reconstruct an empty cluster")
    if mode == "substitution":
        return _reconstruct_substitution(cluster, alphabet)
    if mode == "indel":
        return _reconstruct_indel(cluster, alphabet, band)
    raise DomainError(f"unknown reconstruction mode {mode!r}")


# ============== Scoring ==============


class ClusterScore(NamedTuple):
    precision: float
    recall: float
    accuracy: float


def _pair_count(sizes: Iterable[int]) -> int:
    return sum(s * (s - 1) // 2 for s in sizes)


def score_clustering(assignment: ClusterAssignment, origins: np.ndarray) -> ClusterScore:
    """
    Pairwise precision and recall against ground-truth origins, plus accuracy.

    Precision (recall) is 1 when no pair is predicted (exists). A read counts
    towards accuracy when its origin is the plurality origin of its cluster
    and its cluster is the plurality cluster of its origin.
    """
    labels = assignment.labels
    origins = np.asarray(origins)
    if len(labels) != len(origins):
        raise ContractViolation("assignment and origins cover different reads")
    if len(labels) == 0:
        return ClusterScore(1.0, 1.0, 1.0)
    joint = Counter(zip(labels.tolist(), origins.tolist()))
    predicted = _pair_count(Counter(labels.tolist()).values())
    actual = _pair_count(Counter(origins.tolist()).values())
    together = _pair_count(joint.values())
    precision = 1.0 if predicted == 0 else together / predicted
    recall = 1.0 if actual == 0 else together / actual

    best_origin: Dict[int, Tuple[int, int]] = {}
    best_cluster: Dict[int, Tuple[int, int]] = {}
    for (label, origin), count in sorted(joint.items()):
        if count > best_origin.get(label, (0, 0))[0]:
            best_origin[label] = (count, origin)
        if count > best_cluster.get(origin, (0, 0))[0]:
            best_cluster[origin] = (count, label)
    correct = sum(
        count
        for (label, origin), count in joint.items()
        if best_origin[label][1] == origin and best_cluster[origin][1] == label
    )
    return ClusterScore(precision, recall, correct / len(labels))


# ============== Pipeline ==============


@dataclass(eq=False)
class PipelineResult:
    assignment: ClusterAssignment
    reconstructed: ReadPool
    candidate_pairs: int
    kept_pairs: int


def run_pipeline(
    reads: ReadPool,
    params: LshParams,
    mode: str = "substitution",
    hash_seed: int = 0,
    mask_seed: Optional[int] = None,
    mask_length: Optional[int] = None,
) -> PipelineResult:
    """
    Cluster a pool of noisy reads and reconstruct one sequence per cluster.

    Args:
        reads: Channel output, still pseudorandomized when ``mask_seed`` is set
        params: LSH and alignment parameters
        mode: ``substitution`` or ``indel`` reconstruction
        hash_seed: Seed of the MinHash family
        mask_seed: When given, reconstructions are derandomized with this seed
        mask_length: Mask length used at randomization time

    Returns:
        PipelineResult; reconstructed sequence c belongs to cluster c
    """
    signatures = [minhash(kmer_shingles(r, params.k), params.h, hash_seed) for r in reads]
    candidates = lsh_pairs(signatures, params)
    kept = filter_pairs(candidates, reads, params)
    assignment = pairs_to_clusters(kept, len(reads))
    estimates = tuple(
        reconstruct([reads[i] for i in members], reads.alphabet, mode, params.band_width)
        for members in assignment.clusters()
    )
    fixed = len({len(s) for s in estimates}) <= 1
    reconstructed = ReadPool(estimates, reads.alphabet, ordered=False, fixed_length=fixed)
    if mask_seed is not None:
        reconstructed = derandomize(reconstructed, mask_seed, mask_length)
    logger.info(
        f"Pipeline: {len(reads)} reads, {len(candidates)} candidate pairs, "
        f"{len(kept)} kept, {assignment.n_clusters} clusters"
    )
    return PipelineResult(assignment, reconstructed, len(candidates), len(kept))
