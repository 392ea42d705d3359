"""Exception hierarchy shared by every sintail module."""

from typing import Optional


class SintailError(Exception):
    """Base class for all sintail errors."""


class ConfigError(SintailError):
    """Invalid configuration file, environment variable or flag value."""


class PrecisionError(SintailError):
    def __init__(self, bits: int):
        super().__init__(f"precision must be at least 32 bits, got {bits}")
        self.bits = bits

    def __reduce__(self):
        return type(self), (self.bits,)


class IndexRangeError(SintailError):
    def __init__(self, n: int, reason: str = "index must be a positive integer"):
        super().__init__(f"{reason}: {n}")
        self.n = n
        self.reason = reason

    def __reduce__(self):
        return type(self), (self.n, self.reason)


class IntervalDomainError(SintailError):
    """An interval operation was asked to leave its mathematical domain."""


class DivisionByZeroInterval(IntervalDomainError):
    pass


class LogDomainError(IntervalDomainError):
    pass


class SqrtDomainError(IntervalDomainError):
    pass


class UndecidableAtPrecision(SintailError):
    """The certify-or-refine loop ran past its precision ceiling."""

    def __init__(self, n: int, bits: int, what: str = "classification"):
        super().__init__(
            f"{what} of n={n} is undecidable at {bits} bits (precision ceiling reached)"
        )
        self.n = n
        self.bits = bits
        self.what = what

    def __reduce__(self):
        return type(self), (self.n, self.bits, self.what)


class HypothesisViolation(SintailError):
    def __init__(self, q: int):
        super().__init__(f"Mahler check requires |q| > 1, got q={q}")
        self.q = q

    def __reduce__(self):
        return type(self), (self.q,)


class CacheFormatError(SintailError):
    def __init__(self, path: str, reason: str, line: Optional[int] = None):
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"bad cache file {where}: {reason}")
        self.path = path
        self.reason = reason
        self.line = line

    def __reduce__(self):
        return type(self), (self.path, self.reason, self.line)
