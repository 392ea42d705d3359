"""Certified evaluation of sum_n (2/3 + sin(n)/3)**n / n."""

from .bounds import (
    RationalApprox,
    TailBound,
    VerificationReport,
    certified_enclosure,
    mahler_check,
    tail_report,
    total_upper_bound,
    verify_lemma_tame,
    verify_wild_growth,
)
from .classify import Classification, Verdict, WildTable, classify, wild_up_to
from .errors import SintailError
from .hiprec import Interval, pi_enclosure, reduce, sin_enclosure
from .series import Engine, PartialSum, TermValue, partial_sum, term_certified, term_fast

__version__ = "1.0.0"

__all__ = [
    "Classification",
    "Engine",
    "Interval",
    "PartialSum",
    "RationalApprox",
    "SintailError",
    "TailBound",
    "TermValue",
    "Verdict",
    "VerificationReport",
    "WildTable",
    "certified_enclosure",
    "classify",
    "mahler_check",
    "partial_sum",
    "pi_enclosure",
    "reduce",
    "sin_enclosure",
    "tail_report",
    "term_certified",
    "term_fast",
    "total_upper_bound",
    "verify_lemma_tame",
    "verify_wild_growth",
    "wild_up_to",
]
