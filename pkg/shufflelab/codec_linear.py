"""
Random linear scheme for the erasure multi-draw channel.

Each message is a B-bit tag t; the stored data is G t split into M binary
strings of length L. The decoder groups reads into clusters of mutually
consistent reads, forms a consensus per cluster, tries every assignment of
clusters to indices and keeps the tags that satisfy the resulting system.
It only answers when exactly one tag survives.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence as Seq, Set, Tuple

import numpy as np

from .capacity import cluster_gamma
from .channel import BEC, transmit
from .errors import ContractViolation, LayoutError
from .gf2 import BinaryMatrix, pack_bits, unpack_bits
from .sampling import SamplingSpec, moments
from .seqcore import Alphabet, ReadPool, RngLike, Sequence, as_generator, random_pool, split_generators

logger = logging.getLogger(__name__)

MAX_TAGS = 1 << 12
GRAPH_CHUNK = 256


# ============== Codebook ==============


@dataclass(frozen=True, eq=False)
class LinearCodebook:
    """
    Generator matrix plus the explicit list of message tags.

    Codeword bit s*L + j is position j of stored sequence s.
    """

    G: BinaryMatrix
    tags: Tuple[int, ...]
    M: int
    L: int
    codewords: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.G.n_rows != self.M * self.L:
            raise LayoutError(f"G has {self.G.n_rows} rows, expected M*L = {self.M * self.L}")
        if not self.tags:
            raise LayoutError("codebook needs at least one tag")
        tags = BinaryMatrix.from_array(np.stack([unpack_bits(t, self.B) for t in self.tags]))
        # column i of G T^T is codeword i
        columns = BinaryMatrix(self.G.array @ tags.array.T).to_array().T
        object.__setattr__(self, "codewords", tuple(pack_bits(c) for c in columns))

    @property
    def B(self) -> int:
        return self.G.n_cols

    @property
    def rate(self) -> float:
        return math.log2(len(self.tags)) / (self.M * self.L)

    def __len__(self) -> int:
        return len(self.tags)

    def codeword_bits(self, message_index: int) -> np.ndarray:
        """(M, L) bit matrix of one codeword."""
        return unpack_bits(self.codewords[message_index], self.M * self.L).reshape(self.M, self.L)

    def matching_tags(self, mask: int, values: int) -> List[int]:
        """Indices of tags whose codeword equals ``values`` on every bit set in ``mask``."""
        return [i for i, c in enumerate(self.codewords) if c & mask == values]


def gen_codebook(
    M: int,
    L: int,
    B: int,
    num_messages: int,
    rng: RngLike,
    tags: Optional[Seq[int]] = None,
) -> LinearCodebook:
    """
    Draw a random ML x B generator and ``num_messages`` distinct tags.

    Args:
        M: Number of stored sequences
        L: Sequence length
        B: Tag length, at most M*L
        num_messages: Codebook size, at most min(2^B, 4096)
        rng: RandomStream or Generator
        tags: Explicit tags (packed ints) instead of random ones

    Raises:
        LayoutError: B or num_messages out of range
    """
    if not 1 <= B <= M * L:
        raise LayoutError(f"need 1 <= B <= M*L = {M * L}, got B={B}")
    if tags is None and not 1 <= num_messages <= min(1 << B, MAX_TAGS):
        raise LayoutError(f"num_messages must be in [1, {min(1 << B, MAX_TAGS)}], got {num_messages}")
    g_matrix, g_tags = split_generators(rng, "generator", "tags")
    G = BinaryMatrix.random(M * L, B, g_matrix)
    if tags is None:
        chosen: Dict[int, None] = {}
        # rejection keeps draws without replacement for any B
        while len(chosen) < num_messages:
            draw = BinaryMatrix.random(num_messages - len(chosen), B, g_tags)
            for t in draw.packed_rows():
                chosen.setdefault(t, None)
                if len(chosen) == num_messages:
                    break
        tags = tuple(chosen)
    return LinearCodebook(G, tuple(int(t) for t in tags), M, L)


def encode_linear(codebook: LinearCodebook, message_index: int) -> ReadPool:
    """The M stored sequences of one message."""
    if not 0 <= message_index < len(codebook):
        raise LayoutError(f"message index {message_index} outside codebook of {len(codebook)}")
    return ReadPool.from_matrix(codebook.codeword_bits(message_index), Alphabet.BINARY)


# ============== Consistency graph ==============


def consistent(a: Sequence, b: Sequence) -> bool:
    """True iff no position holds two different non-erased symbols."""
    if len(a) != len(b):
        raise ContractViolation(f"consistency needs equal lengths, got {len(a)} and {len(b)}")
    erasure = a.alphabet.erasure
    x, y = a.array, b.array
    return not np.any((x != erasure) & (y != erasure) & (x != y))


def _consistency_matrix(matrix: np.ndarray, erasure: int) -> np.ndarray:
    N = matrix.shape[0]
    adjacency = np.zeros((N, N), dtype=bool)
    known = matrix != erasure
    for start in range(0, N, GRAPH_CHUNK):
        block = matrix[start : start + GRAPH_CHUNK]
        conflict = (
            known[start : start + GRAPH_CHUNK, None, :]
            & known[None, :, :]
            & (block[:, None, :] != matrix[None, :, :])
        ).any(axis=2)
        adjacency[start : start + GRAPH_CHUNK] = ~conflict
    np.fill_diagonal(adjacency, False)
    return adjacency


@dataclass(eq=False)
class ConsistencyGraph:
    """Reads as vertices, an edge between every consistent pair."""

    adjacency: np.ndarray
    correct_edges: Optional[int] = None
    incorrect_edges: Optional[int] = None

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edge_count(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    def edges(self) -> List[Tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))


def build_graph(reads: ReadPool, origins: Optional[np.ndarray] = None) -> ConsistencyGraph:
    """
    Consistency graph of an erasure-channel read pool.

    Args:
        reads: Equal-length reads
        origins: Optional ground-truth origin per read; fills the correct/incorrect edge counts
    """
    if not reads.fixed_length:
        raise ContractViolation("consistency graph needs equal-length reads")
    adjacency = _consistency_matrix(reads.to_matrix(), reads.alphabet.erasure)
    graph = ConsistencyGraph(adjacency)
    if origins is not None:
        origins = np.asarray(origins)
        same = origins[:, None] == origins[None, :]
        upper = np.triu(adjacency, 1)
        graph.correct_edges = int((upper & same).sum())
        graph.incorrect_edges = int((upper & ~same).sum())
    return graph


def consensus_erasure(cluster: Seq[Sequence]) -> Sequence:
    """
    Per position, the first non-erased symbol in the cluster ('?' if none).

    Raises:
        ContractViolation: the cluster is empty or not mutually consistent
    """
    if not cluster:
        raise ContractViolation("consensus of an empty cluster")
    alphabet = cluster[0].alphabet
    # signed copy: the unsigned read arrays cannot hold the -1 sentinel
    matrix = np.stack([s.array for s in cluster]).astype(np.int16)
    known = matrix != alphabet.erasure
    lo = np.where(known, matrix, alphabet.size).min(axis=0)
    hi = np.where(known, matrix, -1).max(axis=0)
    if np.any(known.any(axis=0) & (lo != hi)):
        raise ContractViolation("cluster holds conflicting non-erased symbols")
    first = known.argmax(axis=0)
    consensus = matrix[first, np.arange(matrix.shape[1])]
    consensus[~known.any(axis=0)] = alphabet.erasure
    return Sequence.from_array(consensus.astype(np.uint8), alphabet)


def enumerate_clique_partitions(
    adjacency: np.ndarray,
    k_min: int = 1,
    k_max: Optional[int] = None,
    limit: Optional[int] = None,
) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    """
    Every partition of the vertices into cliques with k_min <= K <= k_max parts.

    Vertices are placed in order, each either joining an existing cluster it is
    adjacent to entirely or opening a new one. Stops after ``limit`` partitions.
    """
    adjacency = np.asarray(adjacency, dtype=bool)
    N = adjacency.shape[0]
    k_max = N if k_max is None else k_max
    neighbours = [set(np.flatnonzero(adjacency[v]).tolist()) for v in range(N)]
    clusters: List[List[int]] = []
    produced = 0

    def place(v: int) -> Iterator[Tuple[Tuple[int, ...], ...]]:
        nonlocal produced
        if limit is not None and produced >= limit:
            return
        if len(clusters) + (N - v) < k_min:
            return
        if v == N:
            produced += 1
            yield tuple(tuple(c) for c in clusters)
            return
        for cluster in clusters:
            if all(u in neighbours[v] for u in cluster):
                cluster.append(v)
                yield from place(v + 1)
                cluster.pop()
        if len(clusters) < k_max:
            clusters.append([v])
            yield from place(v + 1)
            clusters.pop()

    if N == 0:
        if k_min <= 0:
            yield ()
        return
    yield from place(0)


def clustering_count_bound(graph: ConsistencyGraph) -> int:
    """2^U for a graph with U edges: no more clique partitions exist."""
    return 1 << graph.edge_count


# ============== Decoder ==============


def cluster_count_window(M: int, q0: float, epsilon: float) -> Tuple[int, int]:
    """Integer range [max(1, floor((1-q0-eps)M)), min(M, ceil((1-q0+eps)M))]."""
    lo = max(1, math.floor((1.0 - q0 - epsilon) * M + 1e-9))
    hi = min(M, math.ceil((1.0 - q0 + epsilon) * M - 1e-9))
    return lo, hi


@dataclass
class LinearReport:
    """Outcome of one exhaustive linear decode."""

    status: str
    message_index: Optional[int] = None
    candidates: List[int] = field(default_factory=list)
    partitions: int = 0
    systems: int = 0
    underdetermined: int = 0
    truncated: bool = False

    @property
    def success(self) -> bool:
        return self.status == "success"


def _known_bits(consensus: np.ndarray) -> Tuple[int, int]:
    """(mask, values) of the non-erased positions of one consensus string."""
    known = consensus != Alphabet.BINARY.erasure
    return pack_bits(known.astype(np.uint8)), pack_bits(np.where(known, consensus, 0))


def decode_linear(
    reads: ReadPool,
    codebook: LinearCodebook,
    q0: float,
    epsilon: float = 0.1,
    max_partitions: int = 200_000,
    require_full_rank: bool = False,
) -> LinearReport:
    """
    Exhaustive decoder over clique partitions and index assignments.

    For every partition with a cluster count inside the window and every
    injective assignment of clusters to indices, the known consensus bits
    give a system G' t = y. Systems are solved exactly; codebook tags that
    satisfy any consistent system are collected. The decode succeeds only
    if exactly one tag is collected.

    Args:
        reads: Erasure-channel output reads of length L
        codebook: Shared codebook
        q0: Probability that a sequence is never drawn
        epsilon: Half-width of the cluster-count window, as a fraction of M
        max_partitions: Enumeration cap; hitting it fails the decode
        require_full_rank: Skip systems whose rank is below B

    Returns:
        LinearReport with status success, ambiguous, no_solution,
        underdetermined or truncated
    """
    M, L = codebook.M, codebook.L
    if len(reads) == 0:
        return LinearReport("no_solution")
    if not reads.fixed_length or reads.length != L:
        raise LayoutError(f"linear decoder needs reads of length {L}")

    graph = build_graph(reads)
    k_min, k_max = cluster_count_window(M, q0, epsilon)
    report = LinearReport("no_solution")
    seen: Set[Tuple[int, int]] = set()
    matched: Set[int] = set()

    for partition in enumerate_clique_partitions(graph.adjacency, k_min, k_max, max_partitions):
        report.partitions += 1
        known = [
            _known_bits(consensus_erasure([reads[v] for v in cluster]).array)
            for cluster in partition
        ]
        for assignment in itertools.permutations(range(M), len(partition)):
            mask = values = 0
            for (m_c, v_c), s in zip(known, assignment):
                mask |= m_c << (s * L)
                values |= v_c << (s * L)
            if (mask, values) in seen:
                continue
            seen.add((mask, values))
            report.systems += 1
            positions = [i for i in range(M * L) if mask >> i & 1]
            y = np.array([values >> i & 1 for i in positions], dtype=np.uint8)
            solution, rank = codebook.G.select(positions).solve(y)
            if solution is None:
                continue
            if require_full_rank and rank < codebook.B:
                report.underdetermined += 1
                continue
            matched.update(codebook.matching_tags(mask, values))

    report.truncated = report.partitions >= max_partitions
    report.candidates = sorted(matched)
    if report.truncated:
        report.status = "truncated"
    elif len(matched) == 1:
        report.status = "success"
        report.message_index = report.candidates[0]
    elif matched:
        report.status = "ambiguous"
    elif report.underdetermined:
        report.status = "underdetermined"
    logger.debug(
        f"Linear decode: {report.partitions} partitions, {report.systems} systems, "
        f"{len(matched)} candidate tags -> {report.status}"
    )
    return report


# ============== Probes ==============


def rank_probe(B: int, delta: float, trials: int, rng: RngLike) -> float:
    """Fraction of random (1-delta)B x B binary matrices with full rank."""
    if B < 1 or not 0.0 <= delta < 1.0:
        raise ValueError(f"need B >= 1 and 0 <= delta < 1, got B={B}, delta={delta}")
    rows = int(round((1.0 - delta) * B))
    gen = as_generator(rng)
    full = sum(
        BinaryMatrix.random(rows, B, gen).rank() == min(rows, B) for _ in range(trials)
    )
    return full / trials


class EdgeProbe(NamedTuple):
    empirical: float
    exact: float
    stderr: float


def edge_probe(p: float, L: int, pairs: int, rng: RngLike, chunk: int = 100_000) -> EdgeProbe:
    """
    Probability that two independent uniform strings stay consistent after BEC(p).

    The closed form is (1 - (1-p)^2 / 2)^L.
    """
    gen = as_generator(rng)
    hits = 0
    for start in range(0, pairs, chunk):
        n = min(chunk, pairs - start)
        a = gen.integers(0, 2, size=(n, L), dtype=np.uint8)
        b = gen.integers(0, 2, size=(n, L), dtype=np.uint8)
        known = (gen.random((n, L)) >= p) & (gen.random((n, L)) >= p)
        hits += int((~np.any(known & (a != b), axis=1)).sum())
    exact = (1.0 - (1.0 - p) ** 2 / 2.0) ** L
    return EdgeProbe(hits / pairs, exact, math.sqrt(exact * (1.0 - exact) / pairs))


class IncorrectEdges(NamedTuple):
    mean: float
    expected: float
    bound: float
    counts: List[int]


def incorrect_edge_probe(
    M: int, beta: float, p: float, sampling: SamplingSpec, trials: int, rng: RngLike
) -> IncorrectEdges:
    """
    Mean number of consistency edges joining reads of different origins.

    ``expected`` is M(M-1)/2 * E[N]^2 * (1 - (1-p)^2/2)^L and ``bound`` is
    M^(2 - gamma + 1/2).
    """
    L = int(round(beta * math.log2(M)))
    gamma = cluster_gamma(p, beta)
    mean_draws, _ = moments(sampling)
    pair = (1.0 - (1.0 - p) ** 2 / 2.0) ** L
    expected = M * (M - 1) / 2.0 * mean_draws**2 * pair
    g_pool, g_channel = split_generators(rng, "pool", "channel")
    counts = []
    for _ in range(trials):
        trace = transmit(random_pool(M, L, Alphabet.BINARY, g_pool), sampling, BEC(p), g_channel)
        if len(trace.output) == 0:
            counts.append(0)
            continue
        counts.append(build_graph(trace.output, trace.origins).incorrect_edges)
    logger.debug(f"Incorrect edges over {trials} trials: {sum(counts)} (expected {expected * trials:.3g})")
    return IncorrectEdges(float(np.mean(counts)), expected, M ** (2.0 - gamma + 0.5), counts)
