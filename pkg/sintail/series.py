"""
Terms and partial sums of sum_n (2/3 + sin(n)/3)**n / n.

Two engines:

* certified: every term is an Interval and the sum is accumulated with outward
  rounding, so the result encloses the true partial sum;
* fast: fixed 96-bit floats, range reduction against a fixed 256-bit pi and
  compensated summation, with a propagated error estimate.

Both split [1, N] into fixed chunks of 2**16 terms and merge chunk results in
a fixed pairwise tree, so any worker count gives the same bits.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from mpmath.libmp import (
    fone,
    from_float,
    from_int,
    from_man_exp,
    fzero,
    mpf_abs,
    mpf_add,
    mpf_cos_sin,
    mpf_div,
    mpf_exp,
    mpf_ge,
    mpf_log,
    mpf_mul,
    mpf_sign,
    mpf_sub,
    round_ceiling,
    round_floor,
    round_nearest,
    to_float,
)

from .hiprec import (
    DEFAULT_PRECISION,
    MPF,
    Interval,
    add,
    check_index,
    clamp,
    div,
    exp,
    ln,
    mul,
    pi_enclosure,
    power,
    precision_bits,
    sin_enclosure,
)
from .parallel import iter_ordered, make_chunks, pairwise_reduce

log = logging.getLogger(__name__)

CHUNK_TERMS = 2**16
PROGRESS_EVERY = 10**6

FAST_PREC = 96
FAST_PI_BITS = 256
FAST_ERROR_EXP = -90


class Engine(str, Enum):
    CERTIFIED = "certified"
    FAST = "fast"


@dataclass(frozen=True)
class TermValue:
    n: int
    value: Interval
    error_estimate: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "value": self.value.to_dict(),
            "error_estimate": self.error_estimate,
        }


@dataclass(frozen=True)
class PartialSum:
    upto_n: int
    value: Interval
    engine: Engine
    error_estimate: float
    terms_evaluated: int

    @property
    def precision_bits(self) -> int:
        return self.value.prec

    def to_dict(self) -> Dict[str, Any]:
        return {
            "upto_n": self.upto_n,
            "engine": self.engine.value,
            "value": self.value.to_dict(),
            "midpoint": self.value.mid_float(),
            "width": self.value.width_float(),
            "error_estimate": self.error_estimate,
            "terms_evaluated": self.terms_evaluated,
            "precision_bits": self.precision_bits,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PartialSum":
        return cls(
            upto_n=data["upto_n"],
            value=Interval.from_dict(data["value"], data["precision_bits"]),
            engine=Engine(data["engine"]),
            error_estimate=data["error_estimate"],
            terms_evaluated=data["terms_evaluated"],
        )


# ---------------- certified engine -----------------


def base_enclosure(n: int, p: int = DEFAULT_PRECISION) -> Interval:
    """(2 + sin n) / 3, which lies in [1/3, 1]."""
    s = sin_enclosure(n, p)
    b = div(add(s, Interval.exact(2, p), p), Interval.exact(3, p), p)
    return clamp(b, fzero, fone)


def power_certified(n: int, p: int = DEFAULT_PRECISION) -> Interval:
    """Enclosure of (2/3 + sin(n)/3)**n, without the 1/n factor."""
    check_index(n)
    p = precision_bits(p)
    wp = p + n.bit_length() + 8
    b = base_enclosure(n, wp)
    if mpf_sign(b.lo) > 0:
        # exp(n log b) keeps the relative width near n * 2**-wp
        r = exp(mul(Interval.exact(n, wp), ln(b, wp), wp), wp)
    else:
        r = power(b, n, wp)
    r = clamp(r, fzero, fone)
    return Interval(r.lo, r.hi, p)


def term_certified(n: int, p: int = DEFAULT_PRECISION) -> TermValue:
    p = precision_bits(p)
    value = div(power_certified(n, p), Interval.exact(n, p), p)
    return TermValue(n, value)


def _certified_chunk(task: Tuple[int, int, int]) -> Interval:
    first, last, p = task
    acc_prec = p + 24
    total = Interval(fzero, fzero, acc_prec)
    for n in range(first, last + 1):
        total = add(total, term_certified(n, p).value, acc_prec)
    return total


# ---------------- fast engine -----------------


class NeumaierAccumulator:
    """Compensated running sum of mpf values at a fixed precision."""

    __slots__ = ("total", "compensation", "prec")

    def __init__(self, prec: int = FAST_PREC, total: MPF = fzero, compensation: MPF = fzero):
        self.prec = prec
        self.total = total
        self.compensation = compensation

    def add(self, x: MPF) -> None:
        prec = self.prec
        t = mpf_add(self.total, x, prec, round_nearest)
        if mpf_ge(mpf_abs(self.total), mpf_abs(x)):
            lost = mpf_add(mpf_sub(self.total, t, prec, round_nearest), x, prec, round_nearest)
        else:
            lost = mpf_add(mpf_sub(x, t, prec, round_nearest), self.total, prec, round_nearest)
        self.compensation = mpf_add(self.compensation, lost, prec, round_nearest)
        self.total = t

    def merged(self, other: "NeumaierAccumulator") -> "NeumaierAccumulator":
        acc = NeumaierAccumulator(self.prec, self.total, self.compensation)
        acc.add(other.total)
        acc.compensation = mpf_add(
            acc.compensation, other.compensation, self.prec, round_nearest
        )
        return acc

    def value(self) -> MPF:
        return mpf_add(self.total, self.compensation, self.prec, round_nearest)

    def __getstate__(self):
        return (self.prec, self.total, self.compensation)

    def __setstate__(self, state):
        self.prec, self.total, self.compensation = state


_FAST_FIX = FAST_PI_BITS - 2
_fast_pi: Optional[int] = None


def _fast_pi_fixed() -> int:
    """floor(pi * 2**254): the fixed 256-bit pi used by the fast engine."""
    global _fast_pi
    if _fast_pi is None:
        sign, man, exp_, bc = pi_enclosure(FAST_PI_BITS).lo
        shift = exp_ + _FAST_FIX
        _fast_pi = int(man) << shift if shift >= 0 else int(man) >> -shift
    return _fast_pi


_TWO = from_int(2)
_THREE = from_int(3)


def _fast_term_mpf(n: int) -> MPF:
    pi_fix = _fast_pi_fixed()
    x = n << _FAST_FIX
    # a = round((n - pi/2) / (2 pi)), theta = n - pi/2 - 2 pi a
    a = (x - (pi_fix >> 1) + pi_fix) // (2 * pi_fix)
    theta = from_man_exp(x - (4 * a + 1) * pi_fix // 2, -_FAST_FIX, FAST_PREC, round_nearest)
    c = mpf_cos_sin(theta, FAST_PREC, round_nearest, 1)
    base = mpf_div(mpf_add(c, _TWO, FAST_PREC, round_nearest), _THREE, FAST_PREC, round_nearest)
    logs = mpf_mul(from_int(n), mpf_log(base, FAST_PREC, round_nearest), FAST_PREC, round_nearest)
    return mpf_div(mpf_exp(logs, FAST_PREC, round_nearest), from_int(n), FAST_PREC, round_nearest)


def _fast_error(n: int, term: MPF) -> float:
    return (to_float(term) * n + 1.0) * 2.0**FAST_ERROR_EXP


def term_fast(n: int) -> TermValue:
    """Point estimate of term n with |error| <= term * n * 2**-90 + 2**-90."""
    check_index(n)
    t = _fast_term_mpf(n)
    return TermValue(n, Interval(t, t, FAST_PREC), _fast_error(n, t))


def _fast_chunk(task: Tuple[int, int]) -> Tuple[NeumaierAccumulator, float]:
    first, last = task
    acc = NeumaierAccumulator(FAST_PREC)
    err = 0.0
    for n in range(first, last + 1):
        t = _fast_term_mpf(n)
        acc.add(t)
        err += _fast_error(n, t)
    return acc, err


# ---------------- partial sums -----------------


def _log_progress(done: int, reported: int, progress: bool) -> int:
    step = done // PROGRESS_EVERY
    if step > reported:
        (log.info if progress else log.debug)("summed %d terms", step * PROGRESS_EVERY)
    return max(step, reported)


def partial_sum(
    N: int,
    engine: Engine = Engine.FAST,
    p: int = DEFAULT_PRECISION,
    workers: int = 1,
    progress: bool = False,
) -> PartialSum:
    """Sum of terms 1..N with the chosen engine."""
    check_index(N)
    engine = Engine(engine)
    chunks = make_chunks(1, N, CHUNK_TERMS)
    reported = 0
    if engine is Engine.CERTIFIED:
        p = precision_bits(p)
        tasks = [(first, last, p) for first, last in chunks]
        parts: List[Interval] = []
        for (first, last, _), part in zip(tasks, iter_ordered(_certified_chunk, tasks, workers)):
            parts.append(part)
            reported = _log_progress(last, reported, progress)
        total = pairwise_reduce(parts, lambda u, v: add(u, v))
        value = Interval(total.lo, total.hi, p)
        return PartialSum(N, value, engine, 0.0, N)

    accs: List[NeumaierAccumulator] = []
    err = 0.0
    for (first, last), (acc, chunk_err) in zip(chunks, iter_ordered(_fast_chunk, chunks, workers)):
        accs.append(acc)
        err += chunk_err
        reported = _log_progress(last, reported, progress)
    total = pairwise_reduce(accs, lambda u, v: u.merged(v)).value()
    # compensated summation of positive terms: |error| <= (2u + 4 N u^2) * S
    u = 2.0 ** -FAST_PREC
    err += (2 * u + 4 * N * u * u) * to_float(total)
    return PartialSum(N, Interval(total, total, FAST_PREC), engine, err, N)


def agrees_with(fast: PartialSum, certified: PartialSum) -> bool:
    """Fast value lies in the certified interval widened by the fast error."""
    slack = from_float(fast.error_estimate)
    lo = mpf_sub(certified.value.lo, slack, certified.value.prec, round_floor)
    hi = mpf_add(certified.value.hi, slack, certified.value.prec, round_ceiling)
    v = fast.value.lo
    return mpf_ge(v, lo) and mpf_ge(hi, v)
