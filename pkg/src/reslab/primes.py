"""Shared prime services: sieves, factorization, Chebyshev theta.

A single growable sieve backs every module.  Tables are build-once,
read-many; growing the sieve replaces the cached arrays atomically, so
concurrent readers only ever see a complete table.
"""
from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

_SIEVE_HARD_CAP = 2 * 10**9

_limit = 0
_primes = np.empty(0, dtype=np.int64)
_log_primes = np.empty(0, dtype=np.float64)


def _sieve(n: int) -> np.ndarray:
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags).astype(np.int64)


def primes_up_to(n: int) -> np.ndarray:
    """All primes <= n, cached and grown on demand."""
    global _limit, _primes, _log_primes
    n = int(n)
    if n > _SIEVE_HARD_CAP:
        raise ValueError(f"sieve request {n} exceeds hard cap {_SIEVE_HARD_CAP}")
    if n > _limit:
        grown = max(n, 2 * _limit, 1 << 16)
        _primes = _sieve(grown)
        _log_primes = np.log(_primes.astype(np.float64))
        _limit = grown
    return _primes[: bisect_right(_primes, n)]


def log_primes_up_to(n: int) -> np.ndarray:
    """log p for all primes p <= n (aligned with primes_up_to)."""
    k = len(primes_up_to(n))
    return _log_primes[:k]


_CACHE_FRIENDLY = 5 * 10**7


def _segment_primes(lo: int, hi: int) -> np.ndarray:
    """Primes in [lo, hi] by segmented sieve (no giant cached table)."""
    base = primes_up_to(math.isqrt(hi) + 1)
    flags = np.ones(hi - lo + 1, dtype=bool)
    if lo <= 1:
        flags[: max(0, 2 - lo)] = False
    for p in base:
        p = int(p)
        start = max(p * p, ((lo + p - 1) // p) * p)
        if start > hi:
            continue
        flags[start - lo :: p] = False
    return (np.flatnonzero(flags) + lo).astype(np.int64)


def primes_in(lo: float, hi: float, inclusive: bool = True) -> np.ndarray:
    """Primes in [lo, hi] (inclusive=True) or strictly inside (lo, hi)."""
    if hi < 2:
        return np.empty(0, dtype=np.int64)
    if hi > _SIEVE_HARD_CAP:
        raise ValueError(f"prime window end {hi} exceeds cap {_SIEVE_HARD_CAP}")
    hi_int = int(math.floor(hi))
    if hi_int <= _CACHE_FRIENDLY or hi_int <= _limit:
        ps = primes_up_to(hi_int)
    else:
        lo_int = max(2, int(math.ceil(lo)) - 1)
        ps = _segment_primes(lo_int, hi_int)
    if inclusive:
        i = int(np.searchsorted(ps, lo, side="left"))
        j = int(np.searchsorted(ps, hi, side="right"))
    else:
        i = int(np.searchsorted(ps, lo, side="right"))
        j = int(np.searchsorted(ps, hi, side="left"))
    return ps[i:j]


def is_prime(n: int) -> bool:
    n = int(n)
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    # deterministic Miller-Rabin, valid far beyond the sieve cap
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if a % n == 0:
            continue
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def factorize(n: int) -> list[tuple[int, int]]:
    """Prime factorization [(p, e), ...] by trial division."""
    n = int(n)
    if n < 1:
        raise ValueError("factorize requires n >= 1")
    out = []
    for p in (2, 3):
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        if e:
            out.append((p, e))
    p = 5
    while p * p <= n:
        for q in (p, p + 2):
            e = 0
            while n % q == 0:
                n //= q
                e += 1
            if e:
                out.append((q, e))
        p += 6
    if n > 1:
        out.append((n, 1))
    return out


def mobius(n: int) -> int:
    mu = 1
    for _, e in factorize(n):
        if e > 1:
            return 0
        mu = -mu
    return mu


def euler_phi(n: int) -> int:
    phi = 1
    for p, e in factorize(n):
        phi *= (p - 1) * p ** (e - 1)
    return phi


def spf_table(n: int) -> np.ndarray:
    """Smallest-prime-factor table for 0..n (spf[0] = spf[1] = 0)."""
    n = int(n)
    spf = np.zeros(n + 1, dtype=np.int64)
    if n >= 2:
        ar = np.arange(n + 1, dtype=np.int64)
        spf[2::2] = 2
        for p in range(3, math.isqrt(n) + 1, 2):
            if spf[p] == 0:
                sl = slice(p * p, n + 1, 2 * p)
                hit = spf[sl] == 0
                spf[sl] = np.where(hit, p, spf[sl])
        odd = ar[3::2]
        rest = spf[3::2] == 0
        spf[3::2] = np.where(rest, odd, spf[3::2])
    return spf


_THETA_SEGMENT = 10**7


def min_prime_theta_exceeds(target: float, exact_limit: int = 10**9) -> tuple[float, str]:
    """Minimal prime M with theta(M) = sum_{p<=M} log p > target.

    Exact segmented accumulation while the scan stays below exact_limit;
    beyond that the prime number theorem main term theta(M) ~ M is used
    with a relative safety margin, and the method tag says so.
    """
    if target <= math.log(2):
        return 2.0, "exact"
    if target < exact_limit * 0.9:
        acc = 0.0
        lo = 2
        while lo <= exact_limit:
            hi = min(lo + _THETA_SEGMENT - 1, exact_limit)
            ps = primes_in(lo, hi)
            logs = np.log(ps.astype(np.float64))
            c = acc + np.cumsum(logs)
            k = np.searchsorted(c, target, side="right")
            if k < len(ps):
                return float(ps[k]), "exact"
            acc = c[-1] if len(ps) else acc
            lo = hi + 1
    # PNT main term with a margin: theta(M) = M(1 + O(1/log M))
    m = target
    for _ in range(60):
        m = target / (1 - 1.1 / math.log(m)) if m > 20 else target * 1.2
    return m, "pnt"


def chebyshev_theta(x: float) -> float:
    """theta(x) = sum_{p <= x} log p, exact via the sieve."""
    return float(log_primes_up_to(int(x)).sum())
