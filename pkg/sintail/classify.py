"""
Tame/wild classification of indices and enumeration of the wild numbers.

n is tame when |n - pi/2 - 2*pi*a| >= 4 / n**(1/4) for every integer a, and
wild otherwise. Verdicts are certified with interval arithmetic: if the
distance and threshold enclosures overlap, precision is doubled and the test
repeated, up to a ceiling.
"""

import bisect
import logging
import os
import re
import tempfile
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from mpmath.libmp import mpf_ge, mpf_lt

from .errors import CacheFormatError, UndecidableAtPrecision
from .hiprec import (
    DEFAULT_PRECISION,
    Interval,
    absolute,
    check_index,
    div,
    fourth_root,
    pi_enclosure,
    precision_bits,
    reduce,
    reduce_with_center,
)
from .parallel import iter_ordered, make_chunks

log = logging.getLogger(__name__)

DEFAULT_CEILING = 16384
CENTER_CHUNK = 2**14
WILD_CACHE_NAME = "wild-v1.txt"


class Verdict(str, Enum):
    TAME = "tame"
    WILD = "wild"


@dataclass(frozen=True)
class Classification:
    n: int
    a: int
    theta: Interval
    threshold: Interval
    verdict: Verdict
    precision_used: int

    @property
    def is_wild(self) -> bool:
        return self.verdict is Verdict.WILD

    def margin(self) -> float:
        """|theta| - threshold at the midpoints; negative for wild indices."""
        return absolute(self.theta).mid_float() - self.threshold.mid_float()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "a": self.a,
            "theta": self.theta.to_dict(),
            "threshold": self.threshold.to_dict(),
            "verdict": self.verdict.value,
            "margin": self.margin(),
            "precision_bits": self.precision_used,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Classification":
        bits = data["precision_bits"]
        return cls(
            n=data["n"],
            a=data["a"],
            theta=Interval.from_dict(data["theta"], bits),
            threshold=Interval.from_dict(data["threshold"], bits),
            verdict=Verdict(data["verdict"]),
            precision_used=bits,
        )


def threshold(n: int, p: int = DEFAULT_PRECISION) -> Interval:
    """Enclosure of 4 / n**(1/4)."""
    check_index(n)
    p = precision_bits(p)
    return div(Interval.exact(4, p), fourth_root(Interval.exact(n, p), p + 8), p)


def _decide(distance: Interval, limit: Interval) -> Optional[Verdict]:
    if mpf_ge(distance.lo, limit.hi):
        return Verdict.TAME
    if mpf_lt(distance.hi, limit.lo):
        return Verdict.WILD
    return None


def classify(
    n: int, p: int = DEFAULT_PRECISION, ceiling: int = DEFAULT_CEILING
) -> Classification:
    """Certified tame/wild verdict using the nearest center only.

    Centers other than the nearest one are at least 2*pi - pi = pi away, and
    pi exceeds the threshold for every n >= 3; for n = 1, 2 the nearest center
    already makes n wild.
    """
    check_index(n)
    bits = precision_bits(p)
    while True:
        r = reduce(n, bits)
        t = threshold(n, bits)
        verdict = _decide(r.distance(), t)
        if verdict is not None:
            return Classification(n, r.a, r.theta, t, verdict, bits)
        if bits >= ceiling:
            raise UndecidableAtPrecision(n, bits)
        log.debug("n=%d undecided at %d bits, refining", n, bits)
        bits = min(2 * bits, ceiling)


def classify_three_center(
    n: int, p: int = DEFAULT_PRECISION, ceiling: int = DEFAULT_CEILING
) -> Classification:
    """Oracle variant that tests the centers a*-1, a*, a*+1 around n."""
    check_index(n)
    bits = precision_bits(p)
    while True:
        nearest = reduce(n, bits)
        t = threshold(n, bits)
        verdicts = [
            _decide(absolute(reduce_with_center(n, a, bits)), t)
            for a in (nearest.a - 1, nearest.a, nearest.a + 1)
        ]
        if Verdict.WILD in verdicts:
            verdict = Verdict.WILD
        elif all(v is Verdict.TAME for v in verdicts):
            verdict = Verdict.TAME
        else:
            verdict = None
        if verdict is not None:
            return Classification(n, nearest.a, nearest.theta, t, verdict, bits)
        if bits >= ceiling:
            raise UndecidableAtPrecision(n, bits)
        bits = min(2 * bits, ceiling)


# ---------------- wild table -----------------


@dataclass(frozen=True)
class WildTable:
    """W_1 < W_2 < ... for every wild number up to scan_limit.

    When fewer than k wild numbers exist below scan_limit, W_k is simply not
    in the table.
    """

    entries: Tuple[Tuple[int, int], ...]
    scan_limit: int
    precision_used: int

    @classmethod
    def from_values(
        cls, values: Sequence[int], scan_limit: int, precision_used: int
    ) -> "WildTable":
        return cls(
            tuple((k, w) for k, w in enumerate(values, start=1)),
            scan_limit,
            precision_used,
        )

    def __len__(self) -> int:
        return len(self.entries)

    def values(self) -> List[int]:
        return [w for _, w in self.entries]

    def count_upto(self, n: int) -> int:
        return bisect.bisect_right(self.values(), n)

    def values_in(self, lo: int, hi: int) -> List[int]:
        """Wild numbers w with lo < w <= hi."""
        vals = self.values()
        return vals[bisect.bisect_right(vals, lo) : bisect.bisect_right(vals, hi)]

    def truncated(self, limit: int) -> "WildTable":
        if limit >= self.scan_limit:
            return self
        return WildTable(
            tuple((k, w) for k, w in self.entries if w <= limit),
            limit,
            self.precision_used,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scan_limit": self.scan_limit,
            "precision_bits": self.precision_used,
            "count": len(self.entries),
            "entries": [list(e) for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "WildTable":
        return cls(
            tuple((int(k), int(w)) for k, w in data["entries"]),
            data["scan_limit"],
            data["precision_bits"],
        )


def wild_exhaustive(
    limit: int, p: int = DEFAULT_PRECISION, ceiling: int = DEFAULT_CEILING
) -> WildTable:
    """Oracle scan: classify every index in [1, limit]."""
    check_index(limit)
    wilds = []
    used = p
    for n in range(1, limit + 1):
        c = classify(n, p, ceiling)
        used = max(used, c.precision_used)
        if c.is_wild:
            wilds.append(n)
    return WildTable.from_values(wilds, limit, used)


def _center_windows(a_lo: int, a_hi: int, lo: int, hi: int) -> List[int]:
    """Integers in [lo, hi] that lie close enough to a center to be wild.

    Centers c_a = (4a + 1) * pi / 2 are handled in fixed point with pi known to
    well below 2**-60 absolute error at c_a. The window half-width
    4 / max(1, c_a - 4)**(1/4) bounds the threshold of every integer within 4
    of c_a; integers further out are tame.
    """
    frac_bits = hi.bit_length() + 70
    sign, man, exp, bc = pi_enclosure(frac_bits).lo
    shift = exp + frac_bits
    pi_man = int(man) << shift if shift >= 0 else int(man) >> -shift
    one = 1 << frac_bits
    slack = 1 << (frac_bits - 30)
    candidates = []
    for a in range(a_lo, a_hi + 1):
        center = (4 * a + 1) * pi_man // 2
        c_float = center / one
        half_width = 4.0 / max(1.0, c_float - 4.0) ** 0.25
        reach = int(half_width * one) + slack
        first = max(lo, -(-(center - reach) // one))
        last = min(hi, (center + reach) // one)
        candidates.extend(range(first, last + 1))
    return candidates


def _scan_task(task: Tuple[int, int, int, int, int, int]) -> Tuple[List[int], int]:
    a_lo, a_hi, lo, hi, p, ceiling = task
    wilds = []
    used = p
    for n in sorted(set(_center_windows(a_lo, a_hi, lo, hi))):
        c = classify(n, p, ceiling)
        used = max(used, c.precision_used)
        if c.is_wild:
            wilds.append(n)
    return wilds, used


def scan_wild(
    lo: int,
    hi: int,
    p: int = DEFAULT_PRECISION,
    ceiling: int = DEFAULT_CEILING,
    workers: int = 1,
) -> Tuple[List[int], int]:
    """Wild numbers in [lo, hi] by scanning the centers near that range."""
    if hi < lo:
        return [], p
    two_pi = 6.283185307179586
    a_first = max(0, int((lo - 6) / two_pi) - 1)
    a_last = int((hi + 6) / two_pi) + 1
    tasks = [
        (a_lo, a_hi, lo, hi, p, ceiling)
        for a_lo, a_hi in make_chunks(a_first, a_last, CENTER_CHUNK)
    ]
    found = set()
    used = p
    reported = 0
    for task, (wilds, bits) in zip(tasks, iter_ordered(_scan_task, tasks, workers)):
        found.update(wilds)
        used = max(used, bits)
        millions = int(task[1] * two_pi) // 10**6
        if millions > reported:
            reported = millions
            log.info("wild scan passed n=%d000000, %d wild so far", millions, len(found))
    return sorted(found), used


def wild_up_to(
    limit: int,
    p: int = DEFAULT_PRECISION,
    ceiling: int = DEFAULT_CEILING,
    workers: int = 1,
) -> WildTable:
    """Complete ordered wild table for [1, limit]."""
    check_index(limit)
    p = precision_bits(p)
    values, used = scan_wild(1, limit, p, ceiling, workers)
    return WildTable.from_values(values, limit, used)


# ---------------- text cache -----------------

_HEADER_RE = re.compile(r"^# sintail-wild v1 limit=(\d+) bits=(\d+)$")


def save_wild_cache(path: str, table: WildTable, bits: int) -> None:
    """Write the table atomically (temp file, then rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".wild-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(f"# sintail-wild v1 limit={table.scan_limit} bits={bits}\n")
            for k, w in table.entries:
                f.write(f"{k},{w}\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    log.debug("wrote %d wild numbers to %s", len(table), path)


def load_wild_cache(path: str) -> Tuple[WildTable, int]:
    """Read a cache file; returns the table and the bits it was scanned at."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        m = _HEADER_RE.match(header)
        if not m:
            raise CacheFormatError(path, "missing or malformed header", 1)
        limit, bits = int(m.group(1)), int(m.group(2))
        values = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                k_text, w_text = line.split(",")
                k, w = int(k_text), int(w_text)
            except ValueError:
                raise CacheFormatError(path, f"bad entry {line!r}", lineno)
            if k != len(values) + 1:
                raise CacheFormatError(path, f"index {k} out of sequence", lineno)
            if values and w <= values[-1]:
                raise CacheFormatError(path, "wild numbers not increasing", lineno)
            if w > limit:
                raise CacheFormatError(path, f"{w} beyond limit {limit}", lineno)
            values.append(w)
    return WildTable.from_values(values, limit, bits), bits


def cached_wild_up_to(
    limit: int,
    cache_dir: Optional[str],
    p: int = DEFAULT_PRECISION,
    ceiling: int = DEFAULT_CEILING,
    workers: int = 1,
) -> WildTable:
    """wild_up_to backed by the text cache in ``cache_dir``.

    A cached table is reused only if it was scanned at ``p`` bits or more; a
    shorter compatible table is extended instead of rescanned. A rescan never
    replaces a cached table that reaches further than ``limit``.
    """
    if not cache_dir:
        return wild_up_to(limit, p, ceiling, workers)
    path = os.path.join(cache_dir, WILD_CACHE_NAME)
    table = None
    keep_file = False
    try:
        table, bits = load_wild_cache(path)
    except FileNotFoundError:
        log.debug("no wild cache at %s", path)
    except CacheFormatError as e:
        log.warning("ignoring wild cache: %s", e)
    if table is not None and bits < p:
        log.info("wild cache scanned at %d bits < %d, rescanning", bits, p)
        keep_file = table.scan_limit > limit
        table = None
    if table is not None and table.scan_limit >= limit:
        return table.truncated(limit)
    if table is None:
        values, used = scan_wild(1, limit, p, ceiling, workers)
    else:
        log.info("extending wild cache from %d to %d", table.scan_limit, limit)
        extra, used = scan_wild(table.scan_limit + 1, limit, p, ceiling, workers)
        values = table.values() + extra
        used = max(used, table.precision_used)
    result = WildTable.from_values(values, limit, used)
    if keep_file:
        log.info("leaving the larger cached table at %s in place", path)
        return result
    try:
        save_wild_cache(path, result, p)
    except OSError as e:
        log.warning("could not write wild cache %s: %s", path, e)
    return result
