"""
Numerical checks of the convergence argument and certified tail bounds.

Tame terms are at most e^{-sqrt n} / n, wild terms at most 1/n, and the k-th
wild number is at least k**(77/76) / 2. Those three facts are checked on
finite ranges here, and combined with a certified prefix sum into an upper
bound for the whole series.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from mpmath.libmp import from_int, fzero, mpf_add, mpf_ge, mpf_gt, mpf_le, mpf_lt, round_ceiling

from .classify import DEFAULT_CEILING, WildTable, classify, wild_up_to
from .errors import HypothesisViolation, SintailError, UndecidableAtPrecision
from .hiprec import (
    DEFAULT_PRECISION,
    MPF,
    Interval,
    absolute,
    add,
    check_index,
    div,
    exp,
    format_upper,
    ln,
    mpf_to_fraction,
    mul,
    neg,
    pi_enclosure,
    precision_bits,
    sqrt,
    sub,
)
from .parallel import iter_ordered, make_chunks, ordered_map, pairwise_reduce
from .series import CHUNK_TERMS, Engine, PartialSum, partial_sum, power_certified, term_certified

log = logging.getLogger(__name__)

WILD_GROWTH_EXPONENT = Fraction(77, 76)
MAHLER_EXPONENT = 20
SWEEP_CHUNK = 2**12


@dataclass(frozen=True)
class RationalApprox:
    p: int
    q: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.p, self.q)

    def __str__(self) -> str:
        return f"{self.p}/{self.q}"


@dataclass(frozen=True)
class TailBound:
    """Upper bounds on the tame and wild parts of sum_{n > after_n}."""

    after_n: int
    tame_tail: MPF
    wild_tail: MPF
    total_tail: MPF
    prec: int = DEFAULT_PRECISION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "after_n": self.after_n,
            "tame_tail": format_upper(self.tame_tail, self.prec),
            "wild_tail": format_upper(self.wild_tail, self.prec),
            "total_tail": format_upper(self.total_tail, self.prec),
            "precision_bits": self.prec,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TailBound":
        prec = data["precision_bits"]

        def up(text: str) -> MPF:
            return Interval.from_bounds(text, text, prec).hi

        return cls(
            data["after_n"],
            up(data["tame_tail"]),
            up(data["wild_tail"]),
            up(data["total_tail"]),
            prec,
        )


@dataclass(frozen=True)
class VerificationReport:
    check: str
    range: Tuple[int, int]
    passed: bool
    failures: Tuple[Any, ...] = ()
    min_slack: Optional[float] = None
    min_slack_at: Optional[int] = None
    precision_bits: int = DEFAULT_PRECISION
    checked: int = 0
    skipped: int = 0
    details: Tuple[Dict[str, Any], ...] = field(default=(), compare=False)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "check": self.check,
            "range": list(self.range),
            "passed": self.passed,
            "failures": list(self.failures),
            "min_slack": self.min_slack,
            "min_slack_at": self.min_slack_at,
            "precision_bits": self.precision_bits,
            "checked": self.checked,
            "skipped": self.skipped,
        }
        if self.details:
            data["details"] = list(self.details)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VerificationReport":
        return cls(
            check=data["check"],
            range=tuple(data["range"]),
            passed=data["passed"],
            failures=tuple(data["failures"]),
            min_slack=data["min_slack"],
            min_slack_at=data["min_slack_at"],
            precision_bits=data["precision_bits"],
            checked=data.get("checked", 0),
            skipped=data.get("skipped", 0),
            details=tuple(data.get("details", ())),
        )


def _min_slack(
    current: Tuple[Optional[float], Optional[int]], slack: float, at: int
) -> Tuple[Optional[float], Optional[int]]:
    if current[0] is None or slack < current[0]:
        return slack, at
    return current


# ---------------- tame terms -----------------


def tame_bound(n: int, p: int = DEFAULT_PRECISION) -> Interval:
    """Enclosure of e^{-sqrt n}."""
    check_index(n)
    p = precision_bits(p)
    return exp(neg(sqrt(Interval.exact(n, p), p + 8)), p)


def _ln_point(x: MPF, bits: int) -> Interval:
    return ln(Interval(x, x, bits))


def _check_tame(n: int, p: int, ceiling: int) -> Tuple[bool, float, int]:
    """(passed, log slack, bits) for one tame index, refining on near misses."""
    bits = p
    while True:
        power = power_certified(n, bits)
        bound = tame_bound(n, bits)
        if mpf_le(power.hi, bound.lo):
            slack = sub(_ln_point(bound.lo, bits), _ln_point(power.hi, bits))
            return True, slack.mid_float(), bits
        if mpf_gt(power.lo, bound.hi):
            slack = sub(_ln_point(bound.hi, bits), _ln_point(power.lo, bits))
            return False, slack.mid_float(), bits
        if bits >= ceiling:
            raise UndecidableAtPrecision(n, bits, "tame bound check")
        log.debug("tame check of n=%d inconclusive at %d bits", n, bits)
        bits = min(2 * bits, ceiling)


def _tame_task(task: Tuple[int, int, int, int]) -> Dict[str, Any]:
    first, last, p, ceiling = task
    out = {"checked": 0, "skipped": 0, "failures": [], "slack": (None, None), "bits": p}
    for n in range(first, last + 1):
        c = classify(n, p, ceiling)
        if c.is_wild:
            out["skipped"] += 1
            continue
        ok, slack, bits = _check_tame(n, max(p, c.precision_used), ceiling)
        out["checked"] += 1
        out["bits"] = max(out["bits"], bits)
        out["slack"] = _min_slack(out["slack"], slack, n)
        if not ok:
            out["failures"].append(n)
    return out


def verify_lemma_tame(
    n_lo: int,
    n_hi: int,
    p: int = DEFAULT_PRECISION,
    ceiling: int = DEFAULT_CEILING,
    workers: int = 1,
) -> VerificationReport:
    """Certify (2/3 + sin(n)/3)**n <= e^{-sqrt n} for every tame n in [n_lo, n_hi].

    Wild indices are counted as skipped. The slack is the log ratio
    -sqrt(n) - log(power), so it stays readable when the power underflows.
    """
    check_index(n_lo)
    check_index(n_hi)
    if n_hi < n_lo:
        raise SintailError(f"empty range [{n_lo}, {n_hi}]")
    p = precision_bits(p)
    tasks = [(a, b, p, ceiling) for a, b in make_chunks(n_lo, n_hi, SWEEP_CHUNK)]
    checked = skipped = 0
    failures: List[int] = []
    slack: Tuple[Optional[float], Optional[int]] = (None, None)
    bits = p
    for part in iter_ordered(_tame_task, tasks, workers):
        checked += part["checked"]
        skipped += part["skipped"]
        failures.extend(part["failures"])
        bits = max(bits, part["bits"])
        if part["slack"][0] is not None:
            slack = _min_slack(slack, *part["slack"])
    if failures:
        log.warning("tame bound failed for %d indices, first n=%d", len(failures), failures[0])
    return VerificationReport(
        check="lemma-tame",
        range=(n_lo, n_hi),
        passed=not failures,
        failures=tuple(failures),
        min_slack=slack[0],
        min_slack_at=slack[1],
        precision_bits=bits,
        checked=checked,
        skipped=skipped,
    )


# ---------------- wild growth -----------------


def wild_growth_bound(k: int, p: int = DEFAULT_PRECISION) -> Interval:
    """Enclosure of k**(77/76) / 2."""
    check_index(k)
    e = Interval.from_fraction(WILD_GROWTH_EXPONENT, p + 8)
    grown = exp(mul(e, ln(Interval.exact(k, p + 8))), p + 8)
    return Interval.from_fraction(Fraction(1, 2), p) * Interval(grown.lo, grown.hi, p)


def verify_wild_growth(table: WildTable, p: int = DEFAULT_PRECISION) -> VerificationReport:
    """Certify W_k >= k**(77/76) / 2 and W_k >= k for every table entry."""
    if not len(table):
        raise SintailError("wild table is empty")
    p = precision_bits(p)
    failures = []
    slack: Tuple[Optional[float], Optional[int]] = (None, None)
    for k, w in table.entries:
        bound = wild_growth_bound(k, p)
        w_mpf = Interval.exact(w, p)
        if not (mpf_ge(w_mpf.lo, bound.hi) and w >= k):
            failures.append(k)
        slack = _min_slack(slack, sub(w_mpf, bound).mid_float(), k)
    return VerificationReport(
        check="wild-growth",
        range=(1, table.scan_limit),
        passed=not failures,
        failures=tuple(failures),
        min_slack=slack[0],
        min_slack_at=slack[1],
        precision_bits=p,
        checked=len(table),
    )


# ---------------- rational approximations of pi -----------------


@dataclass(frozen=True)
class MahlerCheck:
    approx: RationalApprox
    exponent: Fraction
    gap: Interval
    bound: Interval
    passed: bool

    def slack(self) -> float:
        """log(gap) - log(bound) at the midpoints."""
        return sub(ln(self.gap), ln(self.bound)).mid_float()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.approx.p,
            "q": self.approx.q,
            "exponent": str(self.exponent),
            "gap": self.gap.to_dict(),
            "bound": self.bound.to_dict(),
            "passed": self.passed,
            "precision_bits": self.gap.prec,
        }


def mahler_check(
    r: RationalApprox,
    exponent: Union[int, float, Fraction] = MAHLER_EXPONENT,
    p: int = DEFAULT_PRECISION,
    ceiling: int = DEFAULT_CEILING,
) -> MahlerCheck:
    """Certify |pi - p/q| > 1/|q|**exponent.

    Precision is doubled while the two sides overlap. A failed check only
    means the gap could not be separated from the bound at the ceiling.
    """
    if abs(r.q) <= 1:
        raise HypothesisViolation(r.q)
    e = Fraction(exponent)
    bits = precision_bits(p)
    while True:
        gap = absolute(sub(pi_enclosure(bits), Interval.from_fraction(r.value, bits), bits))
        log_q = ln(Interval.exact(abs(r.q), bits))
        bound = exp(neg(mul(Interval.from_fraction(e, bits), log_q)), bits)
        if mpf_gt(gap.lo, bound.hi):
            return MahlerCheck(r, e, gap, bound, True)
        if bits >= ceiling or mpf_lt(gap.hi, bound.lo):
            return MahlerCheck(r, e, gap, bound, False)
        bits = min(2 * bits, ceiling)


def pi_convergents(count: int, p: int = DEFAULT_PRECISION) -> List[RationalApprox]:
    """The first ``count`` continued-fraction convergents of pi, from 3/1.

    Partial quotients are taken from both ends of a pi enclosure and only those
    on which the ends agree are used; precision is doubled until ``count``
    convergents are certain.
    """
    if count < 1:
        return []
    bits = precision_bits(p)
    while True:
        pi = pi_enclosure(bits)
        x_lo, x_hi = mpf_to_fraction(pi.lo), mpf_to_fraction(pi.hi)
        h_prev, h = 0, 1
        k_prev, k = 1, 0
        out: List[RationalApprox] = []
        while len(out) < count:
            a = x_lo.numerator // x_lo.denominator
            if a != x_hi.numerator // x_hi.denominator:
                break
            h_prev, h = h, a * h + h_prev
            k_prev, k = k, a * k + k_prev
            out.append(RationalApprox(h, k))
            if x_lo == a or x_hi == a:
                break
            x_lo, x_hi = 1 / (x_hi - a), 1 / (x_lo - a)
        if len(out) >= count:
            return out
        log.debug("pi at %d bits gives only %d convergents", bits, len(out))
        bits *= 2


def verify_mahler(
    approximations: Sequence[RationalApprox],
    exponent: Union[int, float, Fraction] = MAHLER_EXPONENT,
    p: int = DEFAULT_PRECISION,
    ceiling: int = DEFAULT_CEILING,
) -> VerificationReport:
    checks = [mahler_check(r, exponent, p, ceiling) for r in approximations]
    slack: Tuple[Optional[float], Optional[int]] = (None, None)
    for c in checks:
        if c.passed:
            slack = _min_slack(slack, c.slack(), c.approx.q)
    failures = tuple(str(c.approx) for c in checks if not c.passed)
    return VerificationReport(
        check="mahler",
        range=(1, len(checks)),
        passed=not failures,
        failures=failures,
        min_slack=slack[0],
        min_slack_at=slack[1],
        precision_bits=max([c.gap.prec for c in checks] + [p]),
        checked=len(checks),
        details=tuple(c.to_dict() for c in checks),
    )


# ---------------- tails and totals -----------------


def tame_tail_bound(N: int, p: int = DEFAULT_PRECISION) -> MPF:
    """Upper bound 2(sqrt N + 1) e^{-sqrt N} on sum_{n > N} e^{-sqrt n}.

    e^{-sqrt t} is decreasing, so the sum is at most its integral from N, whose
    antiderivative is -2(sqrt t + 1) e^{-sqrt t}.
    """
    if N < 0:
        raise SintailError(f"tail start must be nonnegative, got {N}")
    p = precision_bits(p)
    root = sqrt(Interval.exact(N, p), p)
    value = mul(Interval.exact(2, p), mul(add(root, Interval.exact(1, p)), exp(neg(root), p)))
    return value.hi


def wild_tail_bound(N: int, p: int = DEFAULT_PRECISION) -> MPF:
    """Upper bound on sum of 1/n over wild n > N.

    With k* = (2N)**(76/77): the wild numbers above N with index k <= k*
    contribute at most k*/N, and the rest are bounded through
    W_k >= k**(77/76) / 2 by 2 k*^(-77/76) + 152 k*^(-1/76).
    """
    check_index(N)
    p = precision_bits(p)
    wp = p + 8
    log_kstar = mul(Interval.from_fraction(Fraction(76, 77), wp), ln(Interval.exact(2 * N, wp), wp))
    kstar = exp(log_kstar, wp)
    head = div(kstar, Interval.exact(N, wp))
    growth = Interval.from_fraction(WILD_GROWTH_EXPONENT, wp)
    edge = mul(Interval.exact(2, wp), exp(neg(mul(growth, log_kstar)), wp))
    integral = mul(
        Interval.exact(152, wp),
        exp(neg(div(log_kstar, Interval.exact(76, wp))), wp),
    )
    return add(add(head, edge), integral, p).hi


def tail_report(N: int, p: int = DEFAULT_PRECISION) -> TailBound:
    p = precision_bits(p)
    tame = tame_tail_bound(N, p)
    wild = wild_tail_bound(N, p)
    return TailBound(N, tame, wild, mpf_add(tame, wild, p, round_ceiling), p)


def total_upper_bound(
    N0: int,
    p: int = DEFAULT_PRECISION,
    workers: int = 1,
    prefix: Optional[PartialSum] = None,
) -> MPF:
    """Certified upper bound on the whole series from a certified prefix of N0 terms."""
    check_index(N0)
    if prefix is None:
        prefix = partial_sum(N0, Engine.CERTIFIED, p, workers)
    tail = tail_report(N0, p)
    return mpf_add(prefix.value.hi, tail.total_tail, p, round_ceiling)


def certified_enclosure(
    N0: int,
    p: int = DEFAULT_PRECISION,
    workers: int = 1,
    prefix: Optional[PartialSum] = None,
) -> Interval:
    """[S(N0).lo, S(N0).hi + tails]: an enclosure of the infinite sum."""
    check_index(N0)
    if prefix is None:
        prefix = partial_sum(N0, Engine.CERTIFIED, p, workers)
    return Interval(prefix.value.lo, total_upper_bound(N0, p, prefix=prefix), p)


def certify_report(N0: int, p: int = DEFAULT_PRECISION, workers: int = 1) -> Dict[str, Any]:
    prefix = partial_sum(N0, Engine.CERTIFIED, p, workers)
    tail = tail_report(N0, p)
    enclosure = certified_enclosure(N0, p, prefix=prefix)
    return {
        "terms": N0,
        "partial_sum": prefix.to_dict(),
        "tail": tail.to_dict(),
        "enclosure": enclosure.to_dict(),
        "width": enclosure.width_float(),
        "total_upper_bound": format_upper(enclosure.hi, p),
        "below_200": mpf_lt(enclosure.hi, from_int(200)),
        "precision_bits": p,
    }


# ---------------- tame/wild split of a prefix -----------------


@dataclass(frozen=True)
class ClassSums:
    """Certified partial sum up to N split by index class, with majorants."""

    upto_n: int
    tame_sum: Interval
    wild_sum: Interval
    tame_majorant: Interval
    wild_majorant: Interval
    tame_count: int
    wild_count: int

    @property
    def total(self) -> Interval:
        return add(self.tame_sum, self.wild_sum)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "upto_n": self.upto_n,
            "total": self.total.to_dict(),
            "tame_sum": self.tame_sum.to_dict(),
            "wild_sum": self.wild_sum.to_dict(),
            "tame_majorant": self.tame_majorant.to_dict(),
            "wild_majorant": self.wild_majorant.to_dict(),
            "tame_count": self.tame_count,
            "wild_count": self.wild_count,
            "precision_bits": self.tame_sum.prec,
        }


def _zero(p: int) -> Interval:
    return Interval(fzero, fzero, p)


def _class_task(task: Tuple[int, int, int, Tuple[int, ...]]) -> Tuple[Interval, ...]:
    first, last, p, wilds = task
    acc = p + 24
    wild_set = set(wilds)
    sums = [_zero(acc) for _ in range(4)]
    for n in range(first, last + 1):
        term = term_certified(n, p).value
        if n in wild_set:
            sums[1] = add(sums[1], term, acc)
            sums[3] = add(sums[3], Interval.from_fraction(Fraction(1, n), p), acc)
        else:
            sums[0] = add(sums[0], term, acc)
            sums[2] = add(sums[2], tame_bound(n, p), acc)
    return tuple(sums)


def sum_by_class(
    N: int,
    p: int = DEFAULT_PRECISION,
    ceiling: int = DEFAULT_CEILING,
    workers: int = 1,
    table: Optional[WildTable] = None,
) -> ClassSums:
    """Split the certified prefix sum into tame and wild parts.

    Tame terms are compared against sum e^{-sqrt n}, wild ones against sum 1/n.
    """
    check_index(N)
    p = precision_bits(p)
    if table is None or table.scan_limit < N:
        table = wild_up_to(N, p, ceiling, workers)
    tasks = [
        (first, last, p, tuple(table.values_in(first - 1, last)))
        for first, last in make_chunks(1, N, CHUNK_TERMS)
    ]
    parts = ordered_map(_class_task, tasks, workers)
    merged = pairwise_reduce(parts, lambda u, v: tuple(add(x, y) for x, y in zip(u, v)))
    tame_sum, wild_sum, tame_major, wild_major = (Interval(x.lo, x.hi, p) for x in merged)
    wild_count = table.count_upto(N)
    return ClassSums(N, tame_sum, wild_sum, tame_major, wild_major, N - wild_count, wild_count)
