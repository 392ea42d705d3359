import logging
from fractions import Fraction

import pytest
from mpmath import mp

from sintail.hiprec import mpf_to_fraction


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    """Keep every test away from ~/.cache and any sintail.yaml in the cwd."""
    cache = tmp_path / "cache"
    monkeypatch.setenv("SINTAIL_CACHE_DIR", str(cache))
    monkeypatch.delenv("SINTAIL_WORKERS", raising=False)
    monkeypatch.chdir(tmp_path)
    yield cache
    logger = logging.getLogger("sintail")
    logger.handlers.clear()
    logger.setLevel(logging.NOTSET)


def exact(x) -> Fraction:
    """Exact rational value of an mpmath mpf, sign included."""
    return mpf_to_fraction(x._mpf_)


def oracle(func, *args, bits: int = 400) -> Fraction:
    """High-precision reference value computed by mpmath's own routines."""
    with mp.workprec(bits):
        return exact(+func(*[mp.mpf(a) for a in args]))
