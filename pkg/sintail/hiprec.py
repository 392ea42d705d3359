"""
Multi-precision interval substrate.

``Interval`` is a thin value type over mpmath's interval kernels
(``mpmath.libmp.libmpi``). They take raw mpf endpoint pairs and an explicit
precision, round the lower endpoint toward -inf and the upper toward +inf, and
never read or write the global ``mp.prec``. Every function here is therefore
safe to call from several workers at once.
"""

import logging
import os
import struct
import tempfile
import threading
from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, Context, Decimal
from fractions import Fraction
from typing import Any, Dict, Optional, Tuple, Union

from mpmath.libmp import (
    fnone,
    fone,
    from_int,
    from_man_exp,
    from_rational,
    fzero,
    mpf_add,
    mpf_div,
    mpf_ge,
    mpf_gt,
    mpf_le,
    mpf_lt,
    mpf_neg,
    mpf_shift,
    mpf_sign,
    mpf_sub,
    round_ceiling,
    round_floor,
    round_nearest,
    to_float,
    to_int,
    to_str,
)
from mpmath.libmp.libmpi import (
    mpi_abs,
    mpi_add,
    mpi_cos,
    mpi_delta,
    mpi_div,
    mpi_exp,
    mpi_log,
    mpi_lt,
    mpi_mid,
    mpi_mul,
    mpi_neg,
    mpi_pi,
    mpi_pow_int,
    mpi_sqrt,
    mpi_square,
    mpi_sub,
)

from .errors import (
    CacheFormatError,
    DivisionByZeroInterval,
    IndexRangeError,
    IntervalDomainError,
    LogDomainError,
    PrecisionError,
    SqrtDomainError,
)

log = logging.getLogger(__name__)

MIN_PRECISION = 32
DEFAULT_PRECISION = 96
MAX_INDEX = 2**63 - 1

MPF = Tuple[int, Any, int, int]
Number = Union[int, Fraction, "Interval"]


def precision_bits(bits: int) -> int:
    """Validate a binary precision and return it as a plain int."""
    if isinstance(bits, bool) or not isinstance(bits, int) or bits < MIN_PRECISION:
        raise PrecisionError(bits)
    return bits


def check_index(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise IndexRangeError(n)
    return n


# ---------------- conversions -----------------


def mpf_to_fraction(x: MPF) -> Fraction:
    """Exact rational value of a finite mpf tuple."""
    sign, man, exp, bc = x
    man = int(man)
    if sign:
        man = -man
    if exp >= 0:
        return Fraction(man << exp)
    return Fraction(man, 1 << -exp)


def _from_fraction(value: Fraction, prec: int, rnd: str) -> MPF:
    return from_rational(value.numerator, value.denominator, prec, rnd)


def _directed_decimal(x: MPF, digits: int, rounding: str) -> str:
    """Decimal string that lies on the requested side of ``x``."""
    if x == fzero:
        return "0"
    ctx = Context(prec=digits, rounding=rounding, Emax=10**9, Emin=-(10**9))
    nearest = Decimal(to_str(x, digits + 3, strip_zeros=False))
    bounded = ctx.plus(nearest)
    sign, man, exp, bc = x
    if abs(exp) <= 4096:
        exact = mpf_to_fraction(x)
        value = Fraction(bounded)
        if value == exact:
            return str(bounded)
        if (rounding == ROUND_FLOOR) == (value < exact):
            return str(bounded)
    # to_str is only nearest-rounded; one more step makes the side certain
    if rounding == ROUND_FLOOR:
        return str(ctx.next_minus(bounded))
    return str(ctx.next_plus(bounded))


def _parse_decimal(text: str, prec: int, rnd: str) -> MPF:
    return _from_fraction(Fraction(Decimal(text)), prec, rnd)


# ---------------- Interval -----------------


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] of binary floats, both ends raw mpf tuples."""

    lo: MPF
    hi: MPF
    prec: int = DEFAULT_PRECISION

    def __post_init__(self):
        if mpf_gt(self.lo, self.hi):
            raise ValueError(
                f"interval endpoints out of order: {to_str(self.lo, 20)} > {to_str(self.hi, 20)}"
            )

    @classmethod
    def exact(cls, value: int, prec: int = DEFAULT_PRECISION) -> "Interval":
        v = from_int(value)
        return cls(v, v, prec)

    @classmethod
    def from_fraction(
        cls, value: Union[int, Fraction], prec: int = DEFAULT_PRECISION
    ) -> "Interval":
        value = Fraction(value)
        if value.denominator == 1:
            return cls.exact(value.numerator, prec)
        return cls(
            _from_fraction(value, prec, round_floor),
            _from_fraction(value, prec, round_ceiling),
            prec,
        )

    @classmethod
    def from_bounds(
        cls,
        lo: Union[int, Fraction, str],
        hi: Union[int, Fraction, str],
        prec: int = DEFAULT_PRECISION,
    ) -> "Interval":
        lo_f = Fraction(Decimal(lo)) if isinstance(lo, str) else Fraction(lo)
        hi_f = Fraction(Decimal(hi)) if isinstance(hi, str) else Fraction(hi)
        return cls(
            _from_fraction(lo_f, prec, round_floor),
            _from_fraction(hi_f, prec, round_ceiling),
            prec,
        )

    @classmethod
    def from_dict(cls, data: Dict[str, str], prec: int = DEFAULT_PRECISION) -> "Interval":
        return cls(
            _parse_decimal(data["lo"], prec, round_floor),
            _parse_decimal(data["hi"], prec, round_ceiling),
            prec,
        )

    # ----- inspection -----

    @property
    def pair(self) -> Tuple[MPF, MPF]:
        return self.lo, self.hi

    def mid(self) -> MPF:
        return mpi_mid(self.pair, self.prec + 1)

    def mid_float(self) -> float:
        return to_float(self.mid())

    def width(self) -> MPF:
        return mpi_delta(self.pair, self.prec)

    def width_float(self) -> float:
        return to_float(self.width())

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, value: Union[int, float, Fraction, str, "Interval"]) -> bool:
        if isinstance(value, Interval):
            return value.subset_of(self)
        if isinstance(value, str):
            value = Fraction(Decimal(value))
        elif isinstance(value, float):
            value = Fraction(value)
        if isinstance(value, int):
            v = from_int(value)
            return mpf_le(self.lo, v) and mpf_le(v, self.hi)
        return mpf_to_fraction(self.lo) <= value <= mpf_to_fraction(self.hi)

    def __contains__(self, value) -> bool:
        return self.contains(value)

    def subset_of(self, other: "Interval") -> bool:
        return mpf_le(other.lo, self.lo) and mpf_le(self.hi, other.hi)

    def overlaps(self, other: "Interval") -> bool:
        return mpf_le(self.lo, other.hi) and mpf_le(other.lo, self.hi)

    def certainly_lt(self, other: "Interval") -> bool:
        return mpi_lt(self.pair, other.pair) is True

    def to_dict(self, digits: Optional[int] = None) -> Dict[str, str]:
        if digits is None:
            digits = decimal_digits(self.prec)
        return {
            "lo": _directed_decimal(self.lo, digits, ROUND_FLOOR),
            "hi": _directed_decimal(self.hi, digits, ROUND_CEILING),
        }

    def __str__(self) -> str:
        d = self.to_dict(min(decimal_digits(self.prec), 20))
        return f"[{d['lo']}, {d['hi']}]"

    # ----- operators -----

    def __neg__(self) -> "Interval":
        return neg(self)

    def __abs__(self) -> "Interval":
        return absolute(self)

    def __add__(self, other: Number) -> "Interval":
        return add(self, _coerce(other, self.prec))

    def __radd__(self, other: Number) -> "Interval":
        return add(_coerce(other, self.prec), self)

    def __sub__(self, other: Number) -> "Interval":
        return sub(self, _coerce(other, self.prec))

    def __rsub__(self, other: Number) -> "Interval":
        return sub(_coerce(other, self.prec), self)

    def __mul__(self, other: Number) -> "Interval":
        return mul(self, _coerce(other, self.prec))

    def __rmul__(self, other: Number) -> "Interval":
        return mul(_coerce(other, self.prec), self)

    def __truediv__(self, other: Number) -> "Interval":
        return div(self, _coerce(other, self.prec))

    def __rtruediv__(self, other: Number) -> "Interval":
        return div(_coerce(other, self.prec), self)

    def __pow__(self, k: int) -> "Interval":
        return power(self, k)


def decimal_digits(prec: int) -> int:
    """Decimal digits that faithfully show a ``prec``-bit float."""
    return int(prec * 0.30103) + 2


def interval_from_str(lo: str, hi: str, prec: int = DEFAULT_PRECISION) -> Interval:
    return Interval.from_bounds(lo, hi, precision_bits(prec))


def format_upper(x: MPF, prec: int) -> str:
    """Decimal string >= x."""
    return _directed_decimal(x, decimal_digits(prec), ROUND_CEILING)


def _coerce(value: Number, prec: int) -> Interval:
    if isinstance(value, Interval):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return Interval.from_fraction(value, prec)
    raise TypeError(f"cannot use {type(value).__name__} as an interval operand")


def _prec(prec: Optional[int], *operands: Interval) -> int:
    if prec is not None:
        return prec
    return max(x.prec for x in operands)


# ---------------- interval suite -----------------


def _wrap(pair: Tuple[MPF, MPF], prec: int) -> Interval:
    return Interval(pair[0], pair[1], prec)


def neg(x: Interval) -> Interval:
    return _wrap(mpi_neg(x.pair), x.prec)


def absolute(x: Interval) -> Interval:
    return _wrap(mpi_abs(x.pair), x.prec)


def add(x: Interval, y: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x, y)
    return _wrap(mpi_add(x.pair, y.pair, prec), prec)


def sub(x: Interval, y: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x, y)
    return _wrap(mpi_sub(x.pair, y.pair, prec), prec)


def mul(x: Interval, y: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x, y)
    return _wrap(mpi_mul(x.pair, y.pair, prec), prec)


def square(x: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x)
    return _wrap(mpi_square(x.pair, prec), prec)


def div(x: Interval, y: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x, y)
    # mpi_div widens to the whole line here instead of failing
    if mpf_sign(y.lo) <= 0 <= mpf_sign(y.hi):
        raise DivisionByZeroInterval(f"division by an interval containing zero: {y}")
    return _wrap(mpi_div(x.pair, y.pair, prec), prec)


def scale2(x: Interval, k: int) -> Interval:
    """Exact multiplication by 2**k."""
    return Interval(mpf_shift(x.lo, k), mpf_shift(x.hi, k), x.prec)


def clamp(x: Interval, lo: MPF, hi: MPF) -> Interval:
    """Intersect with [lo, hi], a range known to hold the true value."""
    new_lo = x.lo if mpf_ge(x.lo, lo) else lo
    new_hi = x.hi if mpf_le(x.hi, hi) else hi
    if mpf_gt(new_lo, new_hi):
        raise IntervalDomainError(f"{x} does not meet the clamp range")
    return Interval(new_lo, new_hi, x.prec)


def power(x: Interval, k: int, prec: Optional[int] = None) -> Interval:
    """x**k for a nonnegative integer k."""
    if k < 0:
        raise IntervalDomainError(f"negative exponent {k}")
    prec = _prec(prec, x)
    result = _wrap(mpi_pow_int(x.pair, k, prec), prec)
    if mpf_sign(x.lo) >= 0 and mpf_le(x.hi, fone):
        result = clamp(result, fzero, fone)
    return result


def exp(x: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x)
    return _wrap(mpi_exp(x.pair, prec), prec)


def ln(x: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x)
    if mpf_sign(x.lo) <= 0:
        raise LogDomainError(f"logarithm of an interval reaching zero or below: {x}")
    return _wrap(mpi_log(x.pair, prec), prec)


def sqrt(x: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x)
    if mpf_sign(x.lo) < 0:
        raise SqrtDomainError(f"square root of an interval reaching below zero: {x}")
    return _wrap(mpi_sqrt(x.pair, prec), prec)


def fourth_root(x: Interval, prec: Optional[int] = None) -> Interval:
    prec = _prec(prec, x)
    return sqrt(sqrt(x, prec + 8), prec)


def cos_reduced(theta: Interval, prec: Optional[int] = None) -> Interval:
    """Cosine enclosure for |theta| < 2*pi, forced to reach 1 across 0 and -1 across ±pi."""
    prec = _prec(prec, theta)
    pi_lo = pi_enclosure(prec).lo
    two_pi_lo = mpf_shift(pi_lo, 1)
    if not (mpf_lt(mpf_neg(two_pi_lo), theta.lo) and mpf_lt(theta.hi, two_pi_lo)):
        raise IntervalDomainError(f"cos_reduced needs |theta| < 2*pi, got {theta}")
    c = _wrap(mpi_cos(theta.pair, prec), prec)
    lo, hi = c.lo, c.hi
    if mpf_sign(theta.lo) <= 0 <= mpf_sign(theta.hi):
        hi = fone
    if mpf_ge(theta.hi, pi_lo) or mpf_le(theta.lo, mpf_neg(pi_lo)):
        lo = fnone
    return clamp(Interval(lo, hi, prec), fnone, fone)


# ---------------- pi -----------------


def _certified_pi_floor(bits: int) -> int:
    """floor(pi * 2**(bits - 2)), the top ``bits`` bits of pi."""
    guard = 32
    while True:
        lo, hi = mpi_pi(bits + guard)
        m_lo = to_int(mpf_shift(lo, bits - 2), round_floor)
        m_hi = to_int(mpf_shift(hi, bits - 2), round_floor)
        if m_lo == m_hi:
            return m_lo
        guard *= 2


def _pi_from_mantissa(m: int, bits: int) -> Interval:
    return Interval(
        from_man_exp(m, 2 - bits), from_man_exp(m + 1, 2 - bits), bits
    )


class PiCache:
    """Append-only map from precision to pi mantissa.

    Reads are lock-free; building a missing entry is serialized. A seed loaded
    from the binary cache file answers any precision up to its own, and gives
    bit-identical enclosures to a fresh computation because both are the exact
    floor of pi at that precision.
    """

    def __init__(self):
        self._entries: Dict[int, Interval] = {}
        self._seed: Optional[Tuple[int, int]] = None
        self._lock = threading.Lock()

    def get(self, bits: int) -> Interval:
        entry = self._entries.get(bits)
        if entry is not None:
            return entry
        with self._lock:
            entry = self._entries.get(bits)
            if entry is None:
                entry = _pi_from_mantissa(self._mantissa(bits), bits)
                self._entries[bits] = entry
        return entry

    def _mantissa(self, bits: int) -> int:
        if self._seed is not None and self._seed[0] >= bits:
            seed_bits, seed_man = self._seed
            return seed_man >> (seed_bits - bits)
        return _certified_pi_floor(bits)

    def seed(self, bits: int, mantissa: int) -> None:
        with self._lock:
            if self._seed is None or self._seed[0] < bits:
                self._seed = (bits, mantissa)

    @property
    def seed_bits(self) -> int:
        return self._seed[0] if self._seed else 0


PI_CACHE = PiCache()


def pi_enclosure(p: int) -> Interval:
    """Interval containing pi, one ulp wide at precision ``p``."""
    return PI_CACHE.get(precision_bits(p))


PI_FILE_MAGIC = b"SINTAIL-PI\x00"
PI_FILE_VERSION = 1
_PI_HEADER = struct.Struct("<11sBQ")


def save_pi_file(path: str, bits: int) -> None:
    bits = precision_bits(bits)
    mantissa = _certified_pi_floor(bits)
    payload = _PI_HEADER.pack(PI_FILE_MAGIC, PI_FILE_VERSION, bits)
    payload += mantissa.to_bytes((bits + 7) // 8, "little")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".pi-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    log.debug("wrote %d-bit pi to %s", bits, path)


def load_pi_file(path: str) -> Tuple[int, int]:
    """Read (bits, mantissa) from a pi cache file, checking every bit against pi."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _PI_HEADER.size:
        raise CacheFormatError(path, "truncated header")
    magic, version, bits = _PI_HEADER.unpack_from(data)
    if magic != PI_FILE_MAGIC:
        raise CacheFormatError(path, "bad magic")
    if version != PI_FILE_VERSION:
        raise CacheFormatError(path, f"unsupported version {version}")
    if bits < MIN_PRECISION:
        raise CacheFormatError(path, f"precision {bits} below {MIN_PRECISION}")
    body = data[_PI_HEADER.size :]
    if len(body) != (bits + 7) // 8:
        raise CacheFormatError(path, "mantissa length does not match precision")
    mantissa = int.from_bytes(body, "little")
    if mantissa.bit_length() != bits:
        raise CacheFormatError(path, "mantissa is not normalized")
    if mantissa != _certified_pi_floor(bits):
        raise CacheFormatError(path, "stored digits are not pi")
    return bits, mantissa


def seed_pi_cache(path: str, bits: int) -> None:
    """Seed PI_CACHE from ``path``; rewrite the file when missing or too short.

    A missing or unreadable file is never an error: pi is recomputed.
    """
    try:
        stored_bits, mantissa = load_pi_file(path)
    except FileNotFoundError:
        log.debug("no pi cache at %s", path)
    except CacheFormatError as e:
        log.warning("ignoring pi cache: %s", e)
    else:
        PI_CACHE.seed(stored_bits, mantissa)
        if stored_bits >= bits:
            return
    try:
        save_pi_file(path, bits)
        PI_CACHE.seed(*load_pi_file(path))
    except OSError as e:
        log.warning("could not write pi cache %s: %s", path, e)


# ---------------- argument reduction -----------------


@dataclass(frozen=True)
class ReducedAngle:
    """n = theta + pi/2 + 2*pi*a with |theta| <= pi."""

    n: int
    a: int
    theta: Interval
    work_bits: int

    def center(self) -> Interval:
        """The point pi/2 + 2*pi*a nearest to n."""
        pi = pi_enclosure(self.work_bits)
        return scale2(mul(pi, Interval.exact(4 * self.a + 1, self.work_bits)), -1)

    def distance(self) -> Interval:
        return absolute(self.theta)


def reduction_bits(n: int, p: int) -> int:
    """Working precision for reducing n: p plus the bits cancelled by n - 2*pi*a."""
    return p + n.bit_length() + 16


def reduce_with_center(n: int, a: int, p: int) -> Interval:
    """Enclosure of n - pi/2 - 2*pi*a at the precision reduce() uses."""
    wp = reduction_bits(n, p)
    pi = pi_enclosure(wp)
    offset = scale2(mul(pi, Interval.exact(4 * a + 1, wp), wp), -1)
    theta = sub(Interval.exact(n, wp), offset, wp)
    return Interval(theta.lo, theta.hi, p)


def reduce(n: int, p: int = DEFAULT_PRECISION) -> ReducedAngle:
    check_index(n)
    p = precision_bits(p)
    wp = reduction_bits(n, p)
    pi = pi_enclosure(wp)
    # a = round((n - pi/2) / (2*pi)) = round((2n - pi) / (4*pi))
    pi_mid = pi.mid()
    t = mpf_div(
        mpf_sub(from_int(2 * n), pi_mid, wp, round_nearest),
        mpf_shift(pi_mid, 2),
        wp,
        round_nearest,
    )
    a = to_int(mpf_add(t, from_man_exp(1, -1), wp, round_nearest), round_floor)
    return ReducedAngle(n=n, a=a, theta=reduce_with_center(n, a, p), work_bits=wp)


def sin_enclosure(n: int, p: int = DEFAULT_PRECISION) -> Interval:
    """Interval containing sin n, clamped to [-1, 1]."""
    r = reduce(n, p)
    # sin n = sin(theta + pi/2 + 2*pi*a) = cos(theta)
    return cos_reduced(r.theta, p)
