"""Tests for the Reed-Solomon outer code over GF(2^m)."""

import numpy as np
import pytest

from ..errors import LayoutError
from ..outer_code import OuterCodeSpec, field_bits_for, gf, outer_decode, outer_encode, vandermonde


class TestField:
    def test_field_bits(self):
        assert field_bits_for(1) == 1
        assert field_bits_for(256) == 8
        assert field_bits_for(257) == 9

    def test_field_class_is_cached(self):
        assert gf(8) is gf(8)
        assert gf(8).order == 256
        with pytest.raises(LayoutError):
            gf(17)

    def test_vandermonde(self):
        F = gf(4)
        V = vandermonde(F([0, 1, 2]), 3)
        # 2^2 = x^2 = 4 in GF(16)
        assert V.tolist() == [[1, 0, 0], [1, 1, 1], [1, 2, 4]]


class TestOuterCode:
    """Systematic Reed-Solomon with erasure and substitution decoding."""

    @pytest.fixture
    def spec(self):
        return OuterCodeSpec(15, 7)

    @pytest.fixture
    def data(self, gen):
        return gen.integers(0, 16, size=(3, 7))

    def test_systematic(self, spec, data):
        codewords = outer_encode(data, spec)
        assert codewords.shape == (3, 15)
        assert codewords.dtype == np.int64
        assert np.array_equal(codewords[:, :7], data)

    def test_codewords_are_low_degree(self, spec, data):
        # any k positions determine the rest
        codewords = outer_encode(data, spec)
        erased = np.ones(15, dtype=bool)
        erased[8:] = False
        result = outer_decode(codewords, erased, spec)
        assert result.success
        assert np.array_equal(result.data, data)

    def test_field_chosen_from_n(self):
        assert OuterCodeSpec(15, 7).m == 4
        assert OuterCodeSpec(256, 200).m == 8
        assert OuterCodeSpec(256, 225, m=11).field.order == 2048

    def test_invalid_dimensions(self):
        with pytest.raises(LayoutError):
            OuterCodeSpec(7, 8)
        with pytest.raises(LayoutError):
            OuterCodeSpec(20, 10, m=4)

    def test_erasures_up_to_redundancy(self, spec, data, gen):
        codewords = outer_encode(data, spec)
        erased = np.zeros(15, dtype=bool)
        erased[gen.choice(15, size=8, replace=False)] = True
        result = outer_decode(np.where(erased, 0, codewords), erased, spec)
        assert result.success
        assert result.erasures == 8
        assert np.array_equal(result.data, data)

    def test_too_many_erasures(self, spec, data):
        erased = np.zeros(15, dtype=bool)
        erased[:9] = True
        result = outer_decode(outer_encode(data, spec), erased, spec)
        assert not result.success
        assert result.failed_rows == [0, 1, 2]

    def test_substitutions(self, spec, data, gen):
        received = outer_encode(data, spec).copy()
        for row in range(3):
            hit = gen.choice(15, size=4, replace=False)
            received[row, hit] ^= gen.integers(1, 16, size=4)
        result = outer_decode(received, np.zeros(15, dtype=bool), spec)
        assert result.success
        assert result.substitutions == 4
        assert np.array_equal(result.data, data)

    def test_mixed_budget(self, spec, data):
        received = outer_encode(data, spec).copy()
        erased = np.zeros(15, dtype=bool)
        erased[[0, 14]] = True
        received[:, [3, 7, 11]] ^= 5
        result = outer_decode(received, erased, spec)
        assert result.success
        assert np.array_equal(result.data, data)

    def test_gf256_full_length(self, gen):
        spec = OuterCodeSpec(256, 200)
        data = gen.integers(0, 256, size=(2, 200))
        received = outer_encode(data, spec).copy()
        erased = np.zeros(256, dtype=bool)
        erased[gen.choice(256, size=20, replace=False)] = True
        hit = np.flatnonzero(~erased)[:18]
        received[:, hit] ^= 1
        result = outer_decode(received, erased, spec)
        assert result.success
        assert result.substitutions == 18
        assert np.array_equal(result.data, data)

    def test_out_of_range_symbols(self, spec):
        with pytest.raises(LayoutError):
            outer_encode(np.full((1, 7), 16), spec)

    def test_known_bad_columns_rescue_other_rows(self, gen):
        spec = OuterCodeSpec(15, 5)
        data = gen.integers(0, 16, size=(2, 5))
        received = outer_encode(data, spec).copy()
        # row 0: 4 substitutions decode alone; row 1: the same 4 plus 2 more exceed s <= 5
        received[0, [1, 4, 8, 12]] ^= 7
        received[1, [1, 4, 8, 12, 6, 13]] ^= 9
        result = outer_decode(received, np.zeros(15, dtype=bool), spec)
        assert result.success
        assert result.error_columns == [1, 4, 6, 8, 12, 13]
        assert np.array_equal(result.data, data)

    def test_retry_still_reports_failure(self, gen):
        spec = OuterCodeSpec(15, 5)
        data = gen.integers(0, 16, size=(2, 5))
        received = outer_encode(data, spec).copy()
        received[0, [1]] ^= 7
        received[1, [0, 2, 3, 5, 6, 7, 9, 10, 11]] ^= 9
        erased = np.zeros(15, dtype=bool)
        erased[14] = True
        result = outer_decode(received, erased, spec)
        assert not result.success
        assert result.failed_rows == [1]
        assert result.error_columns == [1]
