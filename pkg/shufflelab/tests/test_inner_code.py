"""Tests for inner codes and bit/symbol packing."""

import numpy as np
import pytest

from ..errors import LayoutError, SpecParseError
from ..inner_code import (
    ERASED_BIT,
    ExtendedHamming,
    NoInner,
    ParityProduct,
    Repetition,
    bits_to_symbols,
    candidate_inner_codes,
    parse_inner,
    symbols_to_bits,
)
from ..seqcore import Alphabet


class TestPacking:
    """Symbols to bits, most significant bit first."""

    def test_dna_symbols(self):
        bits = symbols_to_bits(np.array([[0, 1, 2, 3]]), Alphabet.QUATERNARY)
        assert bits.tolist() == [[0, 0, 0, 1, 1, 0, 1, 1]]
        assert bits_to_symbols(bits, Alphabet.QUATERNARY).tolist() == [[0, 1, 2, 3]]

    def test_erased_symbol_erases_both_bits(self):
        bits = symbols_to_bits(np.array([[4, 1]]), Alphabet.QUATERNARY)
        assert bits.tolist() == [[ERASED_BIT, ERASED_BIT, 0, 1]]

    def test_binary_is_identity(self):
        symbols = np.array([[0, 1, 1, 0]])
        assert np.array_equal(symbols_to_bits(symbols, Alphabet.BINARY), symbols)

    def test_odd_bit_count_rejected(self):
        with pytest.raises(LayoutError):
            bits_to_symbols(np.zeros((1, 3)), Alphabet.QUATERNARY)


class TestRepetition:
    """Majority vote over r copies."""

    def test_corrects_minority_flips(self, gen):
        code = Repetition(3)
        bits = gen.integers(0, 2, size=(4, 10)).astype(np.uint8)
        received = code.encode(bits)
        received[:, ::3] ^= 1
        decoded = code.decode(received)
        assert np.array_equal(decoded.bits, bits)
        assert decoded.ok.all()
        assert decoded.corrections.tolist() == [10] * 4

    def test_erasures_are_ignored_in_the_vote(self):
        code = Repetition(3)
        received = np.array([[ERASED_BIT, ERASED_BIT, 1]], dtype=np.uint8)
        decoded = code.decode(received)
        assert decoded.bits.tolist() == [[1]]
        assert decoded.ok.all()

    def test_tie_fails(self):
        decoded = Repetition(2).decode(np.array([[0, 1]], dtype=np.uint8))
        assert not decoded.ok[0]

    def test_length_must_divide(self):
        with pytest.raises(LayoutError):
            Repetition(3).message_bits(10)
        assert Repetition(2).rate(48) == 0.5


class TestParityProduct:
    """Row/column parity grid."""

    @pytest.fixture
    def code(self):
        return ParityProduct(5, 7)

    @pytest.fixture
    def words(self, code, gen):
        bits = gen.integers(0, 2, size=(6, 35)).astype(np.uint8)
        return bits, code.encode(bits)

    def test_codeword_length(self, code):
        assert code.message_bits(48) == 35
        with pytest.raises(LayoutError):
            code.message_bits(64)

    def test_clean(self, code, words):
        bits, codewords = words
        decoded = code.decode(codewords)
        assert np.array_equal(decoded.bits, bits)
        assert decoded.ok.all()
        assert not decoded.corrections.any()

    @pytest.mark.parametrize("position", [0, 17, 47])
    def test_single_error_corrected(self, code, words, position):
        bits, codewords = words
        received = codewords.copy()
        received[:, position] ^= 1
        decoded = code.decode(received)
        assert np.array_equal(decoded.bits, bits)
        assert decoded.ok.all()
        assert decoded.corrections.tolist() == [1] * len(bits)

    def test_double_error_detected(self, code, words):
        _, codewords = words
        received = codewords.copy()
        received[:, [0, 9]] ^= 1
        assert not code.decode(received).ok.any()

    def test_scattered_erasures_filled(self, code, words):
        bits, codewords = words
        received = codewords.copy()
        # one erasure per row and column, on the diagonal
        for i in range(6):
            received[:, i * 8 + i] = ERASED_BIT
        decoded = code.decode(received)
        assert decoded.ok.all()
        assert np.array_equal(decoded.bits, bits)

    def test_erased_square_fails(self, code, words):
        _, codewords = words
        received = codewords.copy()
        received[:, [0, 1, 8, 9]] = ERASED_BIT
        assert not code.decode(received).ok.any()


class TestExtendedHamming:
    """Shortened Hamming code with an overall parity bit."""

    @pytest.fixture
    def code(self):
        return ExtendedHamming(48)

    @pytest.fixture
    def words(self, code, gen):
        bits = gen.integers(0, 2, size=(8, 41)).astype(np.uint8)
        return bits, code.encode(bits)

    def test_dimensions(self, code):
        assert code.check_bits == 6
        assert code.message_bits(48) == 41
        assert ExtendedHamming(8).message_bits(8) == 4
        with pytest.raises(LayoutError):
            code.message_bits(50)
        with pytest.raises(LayoutError):
            ExtendedHamming(3)

    def test_systematic_even_weight(self, code, words):
        bits, codewords = words
        assert codewords.shape == (8, 48)
        assert np.array_equal(codewords[:, :41], bits)
        assert not np.any(codewords.sum(axis=1) % 2)

    def test_clean(self, code, words):
        bits, codewords = words
        decoded = code.decode(codewords)
        assert decoded.ok.all()
        assert np.array_equal(decoded.bits, bits)
        assert not decoded.corrections.any()

    @pytest.mark.parametrize("position", [0, 20, 40, 41, 46, 47])
    def test_single_error_corrected(self, code, words, position):
        bits, codewords = words
        received = codewords.copy()
        received[:, position] ^= 1
        decoded = code.decode(received)
        assert decoded.ok.all()
        assert np.array_equal(decoded.bits, bits)
        assert decoded.corrections.tolist() == [1] * 8

    def test_every_double_error_detected(self, code, words):
        _, codewords = words
        word = codewords[:1]
        received = np.repeat(word, 48 * 47 // 2, axis=0)
        for row, (a, b) in enumerate((a, b) for a in range(48) for b in range(a + 1, 48)):
            received[row, [a, b]] ^= 1
        assert not code.decode(received).ok.any()

    def test_three_erasures_filled(self, code, words):
        bits, codewords = words
        received = codewords.copy()
        received[:, [2, 30, 47]] = ERASED_BIT
        decoded = code.decode(received)
        assert decoded.ok.all()
        assert np.array_equal(decoded.bits, bits)
        assert not decoded.corrections.any()

    def test_erasure_and_error(self, code, words):
        bits, codewords = words
        received = codewords.copy()
        received[:, 5] = ERASED_BIT
        received[:, 33] ^= 1
        decoded = code.decode(received)
        assert decoded.ok.all()
        assert np.array_equal(decoded.bits, bits)
        assert decoded.corrections.tolist() == [1] * 8

    def test_four_erasures_fail(self, code, words):
        _, codewords = words
        received = codewords.copy()
        received[:, [0, 1, 2, 3]] = ERASED_BIT
        assert not code.decode(received).ok.any()

    def test_dna_round_trip(self, code, words):
        bits, codewords = words
        symbols = bits_to_symbols(codewords, Alphabet.QUATERNARY)
        decoded = code.decode(symbols_to_bits(symbols, Alphabet.QUATERNARY))
        assert np.array_equal(decoded.bits, bits)


class TestCandidates:
    def test_codes_filling_48_bits(self):
        found = candidate_inner_codes(48)
        assert NoInner() in found
        assert Repetition(2) in found and Repetition(3) in found
        assert ParityProduct(5, 7) in found and ParityProduct(2, 15) in found
        assert ExtendedHamming(48) in found
        for code in found:
            assert code.message_bits(48) >= 1


class TestParseInner:
    def test_forms(self):
        assert parse_inner("none") == NoInner()
        assert parse_inner("rep:3") == Repetition(3)
        assert parse_inner("parity:5,7") == ParityProduct(5, 7)
        assert parse_inner("hamming:48") == ExtendedHamming(48)

    @pytest.mark.parametrize("text", ["rep", "parity:5", "golay:23", "hamming:x", "rep:x"])
    def test_malformed(self, text):
        with pytest.raises(SpecParseError):
            parse_inner(text)

    def test_uncoded_erasure_fails(self):
        decoded = NoInner().decode(np.array([[0, ERASED_BIT, 1]], dtype=np.uint8))
        assert not decoded.ok[0]
