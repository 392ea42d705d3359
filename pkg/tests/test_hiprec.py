"""
Tests for the interval substrate, pi enclosures and argument reduction.
"""

import math
import os
from fractions import Fraction

import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from mpmath import mp
from mpmath.libmp import from_man_exp, mpf_le

from sintail.bounds import pi_convergents
from sintail.errors import (
    CacheFormatError,
    DivisionByZeroInterval,
    IndexRangeError,
    IntervalDomainError,
    LogDomainError,
    PrecisionError,
    SqrtDomainError,
)
from sintail.hiprec import (
    MAX_INDEX,
    PI_FILE_MAGIC,
    Interval,
    PiCache,
    _certified_pi_floor,
    add,
    cos_reduced,
    div,
    exp,
    fourth_root,
    interval_from_str,
    ln,
    load_pi_file,
    mpf_to_fraction,
    pi_enclosure,
    power,
    precision_bits,
    reduce,
    save_pi_file,
    seed_pi_cache,
    sin_enclosure,
    sqrt,
    square,
)
from tests.conftest import oracle

PI_DIGITS = "3.14159265358979323846264338327950288419716939937510"


def width(x: Interval) -> Fraction:
    return mpf_to_fraction(x.hi) - mpf_to_fraction(x.lo)


class TestPrecision:
    def test_minimum_is_32_bits(self):
        assert precision_bits(32) == 32
        with pytest.raises(PrecisionError):
            precision_bits(31)

    def test_rejects_non_integers(self):
        with pytest.raises(PrecisionError):
            precision_bits(96.0)
        with pytest.raises(PrecisionError):
            precision_bits(True)


class TestPi:
    def test_64_bits_contains_pi(self):
        pi = pi_enclosure(64)
        assert pi.contains(PI_DIGITS)
        assert width(pi) <= Fraction(1, 2**60)

    def test_four_ulp_64_bit_enclosure_holds_short_decimal(self):
        # 3.141592653589793238 sits about 2.1 ulp below pi at 64 bits
        m = _certified_pi_floor(64)
        wide = Interval(from_man_exp(m - 3, -62), from_man_exp(m + 1, -62), 64)
        assert width(wide) == Fraction(1, 2**60)
        assert wide.contains("3.141592653589793238")
        assert not pi_enclosure(64).contains("3.141592653589793238")
        assert pi_enclosure(64).subset_of(wide)

    def test_short_decimals_are_within_one_part_in_1e14(self):
        # 3.14159265358979 lies below the tight 53-bit enclosure
        pi = pi_enclosure(53)
        assert abs(Fraction(pi.mid_float()) - Fraction("3.14159265358979")) < Fraction(1, 10**14)
        assert pi.contains(PI_DIGITS)

    def test_nesting(self):
        assert pi_enclosure(128).subset_of(pi_enclosure(64))
        assert pi_enclosure(1000).subset_of(pi_enclosure(999))

    def test_matches_independent_pi(self):
        assert pi_enclosure(300).contains(oracle(lambda: mp.pi, bits=600))

    def test_width_at_most_four_ulp(self):
        for p in (32, 96, 257):
            pi = pi_enclosure(p)
            assert width(pi) == Fraction(1, 2 ** (p - 2))

    def test_seeded_cache_gives_identical_bits(self):
        fresh = PiCache()
        seeded = PiCache()
        seeded.seed(512, _certified_pi_floor(512))
        for p in (64, 200, 512):
            assert fresh.get(p) == seeded.get(p)


class TestPiFile:
    def test_save_and_load(self, tmp_path):
        path = str(tmp_path / "pi.bin")
        save_pi_file(path, 256)
        bits, mantissa = load_pi_file(path)
        assert bits == 256
        assert mantissa == _certified_pi_floor(256)
        with open(path, "rb") as f:
            assert f.read(11) == PI_FILE_MAGIC

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "pi.bin"
        path.write_bytes(b"NOT-A-PI-FILE" + bytes(40))
        with pytest.raises(CacheFormatError):
            load_pi_file(str(path))

    @pytest.mark.parametrize("offset,mask", [(36, 0x10), (0, 0x01), (1, 0x80)])
    def test_wrong_digits_rejected(self, tmp_path, offset, mask):
        path = str(tmp_path / "pi.bin")
        save_pi_file(path, 300)
        with open(path, "rb") as f:
            data = bytearray(f.read())
        # the mantissa is little-endian: offset 0 is its lowest byte
        first = len(data) - (300 + 7) // 8
        data[first + offset] ^= mask
        with open(path, "wb") as f:
            f.write(bytes(data))
        with pytest.raises(CacheFormatError, match="not pi"):
            load_pi_file(path)

    def test_corrupt_low_bits_are_not_seeded(self, tmp_path):
        path = str(tmp_path / "pi.bin")
        save_pi_file(path, 300)
        with open(path, "rb") as f:
            data = bytearray(f.read())
        data[len(data) - (300 + 7) // 8] ^= 0x03
        with open(path, "wb") as f:
            f.write(bytes(data))
        seed_pi_cache(path, 300)
        bits, mantissa = load_pi_file(path)
        assert (bits, mantissa) == (300, _certified_pi_floor(300))
        assert pi_enclosure(300).contains(oracle(lambda: mp.pi, bits=600))

    def test_truncated(self, tmp_path):
        path = str(tmp_path / "pi.bin")
        save_pi_file(path, 128)
        with open(path, "rb") as f:
            data = f.read()
        with open(path, "wb") as f:
            f.write(data[:-3])
        with pytest.raises(CacheFormatError):
            load_pi_file(path)

    def test_no_temp_files_left(self, tmp_path):
        save_pi_file(str(tmp_path / "pi.bin"), 64)
        assert os.listdir(tmp_path) == ["pi.bin"]


class TestIntervalSuite:
    def test_square_of_half(self):
        x = square(Interval.from_fraction(Fraction(1, 2)))
        assert x.contains(Fraction(1, 4))
        assert x.is_point()

    def test_exp_of_zero_is_one(self):
        assert exp(Interval.exact(0)).contains(1)

    def test_tight_base_to_the_tenth(self):
        base = div(add(Interval.exact(2), Interval.exact(1)), Interval.exact(3))
        result = power(base, 10)
        assert result.contains(1)
        assert width(result) <= 4 * Fraction(1, 2**96)

    def test_literal_base_to_the_tenth(self):
        two_thirds = Interval.from_fraction(Fraction(2, 3))
        third = Interval.from_fraction(Fraction(1, 3))
        result = (two_thirds + third * Interval.exact(1)) ** 10
        assert result.contains(1)
        assert width(result) <= Fraction(1, 2**86)

    def test_power_stays_in_unit_interval(self):
        x = Interval.from_bounds("0.999999", "1")
        result = power(x, 1000)
        assert mpf_le(result.hi, Interval.exact(1).hi)

    def test_operators_enclose(self):
        x = Interval.from_fraction(Fraction(1, 3))
        y = Interval.from_fraction(Fraction(-2, 7))
        assert (x + y).contains(Fraction(1, 3) + Fraction(-2, 7))
        assert (x - y).contains(Fraction(1, 3) - Fraction(-2, 7))
        assert (x * y).contains(Fraction(1, 3) * Fraction(-2, 7))
        assert (x / y).contains(Fraction(1, 3) / Fraction(-2, 7))
        assert (1 - x).contains(Fraction(2, 3))

    def test_transcendentals_match_oracle(self):
        x = Interval.from_fraction(Fraction(7, 5), 128)
        assert exp(x).contains(oracle(mp.exp, "1.4"))
        assert ln(x).contains(oracle(mp.log, "1.4"))
        assert sqrt(Interval.exact(2, 128)).contains(oracle(mp.sqrt, 2))
        assert fourth_root(Interval.exact(16)).contains(2)

    def test_division_by_interval_with_zero(self):
        with pytest.raises(DivisionByZeroInterval):
            div(Interval.exact(1), Interval.from_bounds(-1, 1))

    def test_log_domain(self):
        with pytest.raises(LogDomainError):
            ln(Interval.from_bounds(0, 1))

    def test_sqrt_domain(self):
        with pytest.raises(SqrtDomainError):
            sqrt(Interval.from_bounds(-1, 1))

    def test_endpoints_must_be_ordered(self):
        one = Interval.exact(1)
        with pytest.raises(ValueError):
            Interval(one.hi, Interval.exact(0).lo)

    def test_nesting_in_precision(self):
        for p in (48, 96, 160):
            x_p = exp(ln(Interval.from_fraction(Fraction(10, 3), p)), p)
            x_2p = exp(ln(Interval.from_fraction(Fraction(10, 3), 2 * p)), 2 * p)
            assert x_2p.subset_of(x_p)

    def test_cos_reduced_handles_critical_points(self):
        around_zero = cos_reduced(Interval.from_bounds("-0.1", "0.2"))
        assert around_zero.contains(1)
        pi = pi_enclosure(96)
        around_pi = cos_reduced(Interval(pi.lo, pi.hi, 96))
        assert around_pi.contains(-1)


class TestSerialization:
    def test_dict_encloses_binary_value(self):
        x = Interval.from_fraction(Fraction(1, 7), 96)
        back = Interval.from_dict(x.to_dict(), 96)
        assert x.subset_of(back)
        assert back.contains(Fraction(1, 7))

    def test_directed_decimal_sides(self):
        x = Interval.from_fraction(Fraction(2, 3), 64)
        d = x.to_dict()
        assert Fraction(d["lo"]) <= mpf_to_fraction(x.lo)
        assert Fraction(d["hi"]) >= mpf_to_fraction(x.hi)

    def test_from_str(self):
        x = interval_from_str("0.1", "0.2")
        assert x.contains("0.1") and x.contains("0.2")
        assert not x.contains("0.25")


class TestReduce:
    def test_one(self):
        r = reduce(1)
        assert r.a == 0
        assert r.theta.mid_float() == pytest.approx(1 - math.pi / 2, abs=1e-15)

    def test_eight(self):
        r = reduce(8)
        assert r.a == 1
        assert r.theta.mid_float() == pytest.approx(8 - 2.5 * math.pi, abs=1e-14)

    def test_rejects_non_positive(self):
        with pytest.raises(IndexRangeError):
            reduce(0)
        with pytest.raises(IndexRangeError):
            reduce(-5)

    @given(st.integers(min_value=1, max_value=MAX_INDEX))
    @settings(max_examples=100, deadline=None)
    def test_reconstruction_and_bounds(self, n):
        r = reduce(n, 96)
        rebuilt = add(r.theta, r.center(), r.work_bits)
        assert rebuilt.contains(n)
        assert width(r.theta) <= Fraction(1, 2**94)
        pi_hi = mpf_to_fraction(pi_enclosure(96).hi)
        assert mpf_to_fraction(r.distance().hi) <= pi_hi + Fraction(1, 2**94)

    def test_deterministic(self):
        assert reduce(10**15 + 7) == reduce(10**15 + 7)


class TestSinEnclosure:
    def test_small_arguments(self):
        assert sin_enclosure(1).mid_float() == pytest.approx(0.8414709848078965, abs=1e-15)
        assert sin_enclosure(8).mid_float() == pytest.approx(0.9893582466233818, abs=1e-15)

    def test_reference_sine_keeps_its_sign(self):
        assert oracle(mp.sin, 129) < 0
        assert oracle(mp.sin, 4) < 0 < oracle(mp.sin, 8)

    @given(st.integers(min_value=1, max_value=10**6))
    @example(4)
    @example(129)
    @settings(max_examples=1000, deadline=None)
    def test_contains_independent_sine(self, n):
        s = sin_enclosure(n, 96)
        assert s.contains(oracle(mp.sin, n))
        assert width(s) <= Fraction(1, 2**92)
        assert mpf_to_fraction(s.lo) >= -1 and mpf_to_fraction(s.hi) <= 1

    @pytest.mark.parametrize("p", [32, 53, 96])
    def test_contains_sine_near_multiples_of_pi(self, p):
        # convergent numerators make sin n tiny, with alternating sign
        numerators = [c.p for c in pi_convergents(26)]
        assert any(oracle(mp.sin, n) < 0 for n in numerators)
        for n in numerators:
            assert sin_enclosure(n, p).contains(oracle(mp.sin, n, bits=600)), n

    @given(st.integers(min_value=1, max_value=10**6))
    @settings(max_examples=1000, deadline=None)
    def test_nesting(self, n):
        assert sin_enclosure(n, 192).subset_of(sin_enclosure(n, 96))

    def test_largest_index(self):
        s = sin_enclosure(MAX_INDEX, 96)
        assert s.contains(oracle(mp.sin, MAX_INDEX, bits=600))
        assert width(s) <= Fraction(1, 2**92)

    def test_clamped_to_unit_range(self):
        one = Interval.exact(1).hi
        assert cos_reduced(Interval.from_bounds("-1e-30", "1e-30")).hi == one
        assert mpf_le(sin_enclosure(33, 32).hi, one)

    def test_cos_reduced_domain_is_two_pi(self):
        assert cos_reduced(Interval.from_bounds("6.2", "6.25")).contains(oracle(mp.cos, "6.2"))
        assert cos_reduced(Interval.from_bounds("-6.28", "-6.2")).contains(-1)
        with pytest.raises(IntervalDomainError):
            cos_reduced(Interval.from_bounds("6.2", "6.3"))
        with pytest.raises(IntervalDomainError):
            cos_reduced(Interval.from_bounds("-6.3", "0"))
