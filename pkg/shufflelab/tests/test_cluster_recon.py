"""Tests for banded alignment, LSH clustering and trace reconstruction."""

import numpy as np
import pytest

from ..alignment import banded_align
from ..channel import Identity, transmit
from ..cluster_recon import (
    LshParams,
    ShingleSet,
    derandomize,
    filter_pairs,
    jaccard,
    kmer_shingles,
    lsh_pairs,
    minhash,
    pairs_to_clusters,
    randomize,
    reconstruct,
    run_pipeline,
    score_clustering,
)
from ..errors import ContractViolation, DomainError
from ..harness import run
from ..models import ExperimentConfig, ExperimentKind
from ..sampling import Fixed
from ..seqcore import Alphabet, ReadPool, Sequence, multiset_equal


def _dna(text):
    return Sequence.from_text(text, Alphabet.QUATERNARY)


def _edit_distance(a, b):
    D = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        prev, D[0] = D[0], i
        for j in range(1, len(b) + 1):
            prev, D[j] = D[j], min(D[j] + 1, D[j - 1] + 1, prev + (a[i - 1] != b[j - 1]))
    return int(D[-1])


class TestBandedAlign:
    """Unit-cost global alignment inside a band."""

    def test_identical(self):
        a = np.array([0, 1, 2, 3, 0])
        alignment = banded_align(a, a)
        assert alignment.distance == 0
        assert alignment.matches == 5
        assert alignment.columns == [(i, i) for i in range(5)]

    def test_single_edits(self):
        b = np.array([0, 1, 2, 3, 2, 1])
        assert banded_align(np.array([0, 1, 3, 3, 2, 1]), b).distance == 1
        deleted = banded_align(np.array([0, 1, 3, 2, 1]), b)
        assert deleted.distance == 1
        assert deleted.matches == 5
        assert deleted.match_fraction(5, 6) == pytest.approx(5 / 6)

    def test_empty(self):
        alignment = banded_align(np.array([]), np.array([]))
        assert alignment.distance == 0
        assert alignment.match_fraction(0, 0) == 1.0

    def test_wide_band_is_exact(self, gen):
        for _ in range(30):
            a = gen.integers(0, 4, size=gen.integers(0, 15))
            b = gen.integers(0, 4, size=gen.integers(0, 15))
            assert banded_align(a, b, band=20).distance == _edit_distance(a, b)

    def test_columns_cover_both_strings(self, gen):
        a, b = gen.integers(0, 2, size=20), gen.integers(0, 2, size=17)
        columns = banded_align(a, b, band=4).columns
        assert [i for i, _ in columns if i >= 0] == list(range(20))
        assert [j for _, j in columns if j >= 0] == list(range(17))

    def test_erasures_never_match(self):
        a = np.array([0, 2, 2, 1])
        assert banded_align(a, a).matches == 4
        erased = banded_align(a, a, erasure=Alphabet.BINARY.erasure)
        assert erased.matches == 2
        assert erased.distance == 2


class TestShingles:
    def test_kmers(self):
        shingles = kmer_shingles(_dna("ACGTAC"), 3)
        assert shingles.texts() == {"ACG", "CGT", "GTA", "TAC"}

    def test_short_read_has_no_shingles(self):
        assert len(kmer_shingles(_dna("AC"), 3)) == 0
        with pytest.raises(DomainError):
            kmer_shingles(_dna("AC"), 0)

    def test_erasure_is_its_own_symbol(self):
        shingles = kmer_shingles(Sequence.from_text("0?1"), 2)
        assert shingles.texts() == {"0?", "?1"}

    def test_jaccard(self):
        a = kmer_shingles(_dna("AAAC"), 2)
        b = kmer_shingles(_dna("AACC"), 2)
        assert jaccard(a, b) == pytest.approx(2 / 3)
        empty = ShingleSet(2, Alphabet.QUATERNARY, frozenset())
        assert jaccard(empty, empty) == 1.0


class TestMinHash:
    """Seeded signatures and their agreement."""

    def test_deterministic(self):
        shingles = kmer_shingles(_dna("ACGTTGCAACGT"), 4)
        assert np.array_equal(minhash(shingles, 16, 3).values, minhash(shingles, 16, 3).values)
        assert not np.array_equal(minhash(shingles, 16, 3).values, minhash(shingles, 16, 4).values)

    def test_agreement_estimates_jaccard(self):
        a = ShingleSet(1, Alphabet.BINARY, frozenset(range(0, 300)))
        b = ShingleSet(1, Alphabet.BINARY, frozenset(range(100, 400)))
        estimate = minhash(a, 512, 1).agreement(minhash(b, 512, 1))
        assert abs(estimate - 0.5) <= 0.1

    def test_empty_never_agrees(self):
        empty = minhash(ShingleSet(2, Alphabet.BINARY, frozenset()), 8, 0)
        assert empty.empty
        assert empty.agreement(empty) == 0.0


class TestLsh:
    """Banding, the alignment filter and union-find."""

    def test_params_validated(self, test_settings):
        with pytest.raises(DomainError):
            LshParams(h=128, bands=60, rows=2)
        with pytest.raises(DomainError):
            LshParams(tau=0.0)
        params = LshParams.from_settings(test_settings, Alphabet.BINARY)
        assert params.k == 12
        assert params.bands * params.rows == params.h

    def test_identical_reads_pair(self):
        params = LshParams(k=3, h=8, bands=4, rows=2)
        reads = [_dna("ACGTTGCA"), _dna("ACGTTGCA"), _dna("A")]
        signatures = [minhash(kmer_shingles(r, params.k), params.h, 0) for r in reads]
        assert lsh_pairs(signatures, params) == {(0, 1)}

    def test_filter_pairs(self):
        reads = ReadPool.from_texts(["ACGTACGTAC", "ACGTACGTAA", "TTTTTTTTTT"], Alphabet.QUATERNARY)
        assert filter_pairs({(0, 1), (0, 2)}, reads, LshParams()) == [(0, 1)]

    def test_filter_drops_erased_pairs(self):
        reads = ReadPool.from_texts(["0??????1", "0??????1", "01101001"], Alphabet.BINARY, ordered=False)
        assert filter_pairs({(0, 1), (1, 2)}, reads, LshParams()) == []

    def test_pairs_to_clusters(self):
        assignment = pairs_to_clusters([(2, 3), (0, 1), (1, 3)], 5)
        assert assignment.labels.tolist() == [0, 0, 0, 0, 1]
        assert assignment.n_clusters == 2
        assert assignment.clusters() == [[0, 1, 2, 3], [4]]
        with pytest.raises(ContractViolation):
            pairs_to_clusters([(0, 5)], 5)


class TestReconstruct:
    def test_substitution_plurality(self):
        cluster = [Sequence.from_text(t) for t in ["0110", "0100", "0110"]]
        assert reconstruct(cluster, Alphabet.BINARY).to_text() == "0110"

    def test_substitution_skips_erasures_and_breaks_ties_low(self):
        cluster = [Sequence.from_text(t) for t in ["0?10", "01?1"]]
        assert reconstruct(cluster, Alphabet.BINARY).to_text() == "0110"

    def test_substitution_uses_modal_length(self):
        cluster = [Sequence.from_text(t) for t in ["011", "011", "0"]]
        assert reconstruct(cluster, Alphabet.BINARY).to_text() == "011"

    def test_indel_majority(self):
        truth = "ACGTTGCAAC"
        cluster = [_dna(t) for t in [truth, "ACGTGCAAC", "ACGTTGGCAAC", "ACGATGCAAC", truth]]
        assert reconstruct(cluster, Alphabet.QUATERNARY, "indel").to_text() == truth

    def test_bad_input(self):
        with pytest.raises(ContractViolation):
            reconstruct([], Alphabet.BINARY)
        with pytest.raises(DomainError):
            reconstruct([Sequence.from_text("0")], Alphabet.BINARY, "median")


class TestScore:
    """Pairwise precision, recall and mutual-plurality accuracy."""

    def test_perfect(self):
        score = score_clustering(pairs_to_clusters([(0, 1), (2, 3)], 4), np.array([5, 5, 7, 7]))
        assert score == (1.0, 1.0, 1.0)

    def test_merged(self):
        score = score_clustering(pairs_to_clusters([(0, 1), (1, 2), (2, 3)], 4), np.array([5, 5, 7, 7]))
        assert score.precision == pytest.approx(1 / 3)
        assert score.recall == 1.0
        assert score.accuracy == 0.5

    def test_singletons_and_empty(self):
        assert score_clustering(pairs_to_clusters([], 3), np.array([0, 1, 2])) == (1.0, 1.0, 1.0)
        assert score_clustering(pairs_to_clusters([], 0), np.array([])) == (1.0, 1.0, 1.0)

    def test_length_mismatch(self):
        with pytest.raises(ContractViolation):
            score_clustering(pairs_to_clusters([], 3), np.array([0, 1]))


class TestRandomize:
    def test_round_trip(self, dna_pool):
        masked = randomize(dna_pool, 99)
        assert masked.texts() != dna_pool.texts()
        assert derandomize(masked, 99).texts() == dna_pool.texts()

    def test_one_mask_for_all_reads(self):
        pool = ReadPool.from_texts(["0?10", "0?10"])
        masked = randomize(pool, 5)
        assert masked[0] == masked[1]
        assert masked[0].to_text()[1] == "?"


class TestPipeline:
    def test_noiseless_duplicates(self, dna_pool, stream):
        mask_seed = 17
        trace = transmit(randomize(dna_pool, mask_seed), Fixed(2), Identity(), stream)
        result = run_pipeline(trace.output, LshParams(), hash_seed=3, mask_seed=mask_seed, mask_length=60)
        assert result.assignment.n_clusters == 20
        assert score_clustering(result.assignment, trace.origins) == (1.0, 1.0, 1.0)
        assert multiset_equal(result.reconstructed, dna_pool)
        assert result.kept_pairs == 20


@pytest.mark.slow
class TestPipelineMonteCarlo:
    """Clusters of a few noisy DNA reads are found and mostly rebuilt exactly."""

    def test_substitutions(self, test_settings):
        config = ExperimentConfig(
            kind=ExperimentKind.CLUSTER_PIPELINE,
            M=100,
            L=100,
            alphabet="quaternary",
            sampling="poisson:5",
            noise="qsc:0.03",
            trials=20,
            seed=21,
        )
        result = run(config, test_settings)
        assert result.summary["mean_accuracy"] >= 0.95
        assert result.summary["mean_covered_exact_fraction"] >= 0.95
        # a sequence drawn once or twice keeps its ~3 substitutions (0.97^100 ~ 0.05 exact),
        # and such sequences are ~12% of those drawn under Poisson(5)
        assert result.summary["mean_exact_fraction"] >= 0.8

    def test_default_banding_pairs_noisy_duplicates(self):
        # same-origin reads under QSC(0.03) share about 44% of their 8-mers
        jaccard = 0.44
        params = LshParams()
        assert 1 - (1 - jaccard**params.rows) ** params.bands >= 0.99
        # 16 bands of 8 rows would pair them about 2% of the time
        assert 1 - (1 - jaccard**8) ** 16 < 0.05

    def test_indels(self, test_settings):
        config = ExperimentConfig(
            kind=ExperimentKind.CLUSTER_PIPELINE,
            M=200,
            L=110,
            alphabet="quaternary",
            sampling="poisson:8",
            noise="indel:0.01,0.01,0.01",
            mode="indel",
            k=8,
            h=128,
            bands=64,
            rows=2,
            trials=2,
            seed=21,
        )
        result = run(config, test_settings)
        assert result.summary["mean_accuracy"] >= 0.95
        assert result.summary["mean_exact_fraction"] >= 0.6
