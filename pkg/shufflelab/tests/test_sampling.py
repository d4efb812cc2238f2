"""Tests for draw-count laws."""

import math

import numpy as np
import pytest

from ..errors import DomainError, SpecParseError, UndefinedConditionalError
from ..sampling import (
    Empirical,
    Fixed,
    NegBinomial,
    Poisson,
    PoissonPCR,
    SingleDraw,
    effective_erasure,
    effective_erasure_series,
    load_empirical,
    moments,
    parse_sampling,
    pgf,
    pmf,
    pmf_vector,
    q0,
    sample_counts,
)


class TestMassAtZero:
    """q0 per variant."""

    def test_poisson(self):
        assert q0(Poisson(1.0)) == pytest.approx(0.367879, abs=1e-6)

    def test_fixed_one(self):
        assert q0(Fixed(1)) == 0.0
        assert q0(Fixed(0)) == 1.0

    def test_single_draw(self):
        assert q0(SingleDraw(0.25)) == 0.25

    def test_pcr(self):
        assert q0(PoissonPCR(2.0, 2.0)) == pytest.approx(0.282418, abs=1e-6)

    def test_negbin(self):
        assert q0(NegBinomial(2.0, 0.5)) == pytest.approx(0.25)

    @pytest.mark.parametrize(
        "spec", [Poisson(2.0), NegBinomial(3.0, 0.4), PoissonPCR(2.0, 3.0), SingleDraw(0.3)]
    )
    def test_pmf_sums_to_one(self, spec):
        vec = pmf_vector(spec)
        assert vec.sum() == pytest.approx(1.0, abs=1e-9)
        assert vec[0] == pytest.approx(q0(spec), abs=1e-12)

    def test_pgf_at_zero_is_q0(self):
        for spec in (Poisson(1.5), NegBinomial(2.0, 0.3), PoissonPCR(4.0, 2.0), Fixed(2)):
            assert pgf(spec, 0.0) == pytest.approx(q0(spec), abs=1e-12)

    def test_pmf_of_fixed(self):
        assert pmf(Fixed(3), 3) == 1.0
        assert pmf(Fixed(3), 2) == 0.0


class TestSampler:
    """sample_counts draws exact laws."""

    def test_fixed_counts(self, stream):
        assert sample_counts(5, Fixed(3), stream).counts.tolist() == [3, 3, 3, 3, 3]

    def test_single_draw_zero_fraction(self, stream):
        counts = sample_counts(100_000, SingleDraw(0.25), stream).counts
        assert abs((counts == 0).mean() - 0.25) <= 0.01

    def test_poisson_mean(self, stream):
        counts = sample_counts(100_000, Poisson(2.0), stream).counts
        assert abs(counts.mean() - 2.0) <= 0.02

    def test_pcr_mean(self, stream):
        counts = sample_counts(100_000, PoissonPCR(5.0, 3.0), stream).counts
        assert abs(counts.mean() - 3.0) <= 0.05

    def test_deterministic(self, stream):
        a = sample_counts(100, Poisson(2.0), stream).counts
        b = sample_counts(100, Poisson(2.0), stream).counts
        assert np.array_equal(a, b)

    def test_empty_pool_rejected(self, stream):
        with pytest.raises(DomainError):
            sample_counts(0, Poisson(2.0), stream)


class TestEffectiveErasure:
    """p_eff = E[p^N | N >= 1]."""

    def test_single_draw_is_p(self):
        assert effective_erasure(SingleDraw(0.4), 0.3) == pytest.approx(0.3)

    def test_poisson_value(self):
        assert effective_erasure(Poisson(2.0), 0.1) == pytest.approx(0.034652, abs=1e-6)

    def test_series_matches_closed_form(self):
        for spec in (Poisson(2.0), Poisson(0.5), NegBinomial(2.0, 0.5), PoissonPCR(3.0, 2.0)):
            for p in (0.05, 0.2, 0.5):
                assert effective_erasure_series(spec, p) == pytest.approx(
                    effective_erasure(spec, p), abs=1e-9
                )

    def test_zero_p(self):
        assert effective_erasure(NegBinomial(2.0, 0.5), 0.0) == 0.0

    def test_undefined_when_never_drawn(self):
        with pytest.raises(UndefinedConditionalError):
            effective_erasure(Fixed(0), 0.1)


class TestMoments:
    """Exact first and second moments."""

    def test_fixed(self):
        assert moments(Fixed(3)) == (3.0, 9.0)

    def test_poisson(self):
        assert moments(Poisson(2.5)) == pytest.approx((2.5, 2.5 + 2.5**2))

    def test_empirical(self):
        assert moments(Empirical((0.5, 0.0, 0.5))) == pytest.approx((1.0, 2.0))

    def test_negbin_matches_pmf(self):
        spec = NegBinomial(2.0, 0.4)
        vec = pmf_vector(spec)
        n = np.arange(len(vec))
        mean, second = moments(spec)
        assert float(np.dot(n, vec)) == pytest.approx(mean, abs=1e-8)
        assert float(np.dot(n * n, vec)) == pytest.approx(second, abs=1e-8)


class TestParsing:
    """Compact sampling specs."""

    def test_forms(self):
        assert parse_sampling("poisson:2") == Poisson(2.0)
        assert parse_sampling("single:0.1") == SingleDraw(0.1)
        assert parse_sampling("fixed:1") == Fixed(1)
        assert parse_sampling("negbin:2,0.5") == NegBinomial(2.0, 0.5)
        assert parse_sampling("pcr:2,3") == PoissonPCR(2.0, 3.0)
        assert parse_sampling("empirical:0.5,0,0.5") == Empirical((0.5, 0.0, 0.5))

    @pytest.mark.parametrize("text", ["poisson", "poisson:x", "fixed:1.5", "binomial:3", "negbin:2"])
    def test_malformed(self, text):
        with pytest.raises(SpecParseError):
            parse_sampling(text)

    def test_empirical_weights_must_sum_to_one(self):
        with pytest.raises(DomainError):
            Empirical((0.5, 0.2))

    def test_empirical_from_file(self, tmp_path):
        path = tmp_path / "law.txt"
        path.write_text("1\n2\n1\n", encoding="ascii")
        spec = load_empirical(path)
        assert spec.weights == pytest.approx((0.25, 0.5, 0.25))
        assert parse_sampling(f"empirical:@{path}").q0() == pytest.approx(0.25)
        assert math.isclose(sum(spec.weights), 1.0)
