"""Exact integer utilities: Kronecker symbols, valuations, factorization."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

_TRIAL_LIMIT = 10**6
_MAX_FACTOR = 2**63


@dataclass(frozen=True)
class PrimePower:
    ell: int
    r: int
    value: int = field(init=False)

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"negative exponent r={self.r}")
        if not is_prime(self.ell):
            raise ValueError(f"{self.ell} is not prime")
        object.__setattr__(self, "value", self.ell**self.r)

    def __str__(self):
        return f"{self.ell}^{self.r}"


@dataclass(frozen=True)
class Factorization:
    n: int
    factors: tuple[tuple[int, int], ...]

    def __iter__(self):
        return iter(self.factors)

    def __len__(self):
        return len(self.factors)

    def primes(self) -> list[int]:
        return [q for q, _ in self.factors]

    def value(self) -> int:
        out = 1
        for q, e in self.factors:
            out *= q**e
        return out


# -- primality ----------------------------------------------------------------

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
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


@lru_cache(maxsize=8)
def _sieve(limit: int) -> np.ndarray:
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for q in range(2, math.isqrt(limit) + 1):
        if flags[q]:
            flags[q * q :: q] = False
    return np.flatnonzero(flags)


def primes_up_to(limit: int) -> list[int]:
    if limit < 2:
        return []
    # round up so that nearby limits share one cached sieve
    size = max(1024, 1 << (limit.bit_length()))
    ps = _sieve(size)
    return [int(q) for q in ps[: np.searchsorted(ps, limit, side="right")]]


def primes_between(lo: int, hi: int) -> list[int]:
    """Primes q with lo <= q <= hi."""
    return [q for q in primes_up_to(hi) if q >= lo]


def first_primes(count: int) -> list[int]:
    bound = 16
    while True:
        ps = primes_up_to(bound)
        if len(ps) >= count:
            return ps[:count]
        bound *= 2


# -- symbols and valuations ---------------------------------------------------


def kronecker_symbol(D: int, n: int) -> int:
    """Kronecker symbol (D|n) for n >= 0.

    (D|0) is 1 for D = +-1 and 0 otherwise; (D|2) is 0, 1, -1 according to
    D = 0, +-1, +-3 (mod 8).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1 if abs(D) == 1 else 0
    result = 1
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    if v:
        if D % 2 == 0:
            return 0
        if v % 2 and D % 8 in (3, 5):
            result = -result
    # Jacobi symbol (D|n) for odd n
    a = D % n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def legendre_table(ell: int) -> np.ndarray:
    """chi[x] = (x|ell) for 0 <= x < ell, ell an odd prime."""
    chi = -np.ones(ell, dtype=np.int64)
    chi[0] = 0
    chi[(np.arange(1, ell, dtype=np.int64) ** 2) % ell] = 1
    return chi


def p_adic_valuation(n: int, ell: int) -> int:
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    n = abs(n)
    v = 0
    while n % ell == 0:
        n //= ell
        v += 1
    return v


def valuation_or_inf(n: int, ell: int) -> float:
    return math.inf if n == 0 else p_adic_valuation(n, ell)


# -- factorization ------------------------------------------------------------


def _pollard_rho(n: int, rng: random.Random) -> int:
    if n % 2 == 0:
        return 2
    while True:
        c = rng.randrange(1, n)
        y = rng.randrange(0, n)
        m, g, r, q = 128, 1, 1, 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g


def _split(n: int, out: dict[int, int], rng: random.Random):
    if n == 1:
        return
    if is_prime(n):
        out[n] = out.get(n, 0) + 1
        return
    d = _pollard_rho(n, rng)
    _split(d, out, rng)
    _split(n // d, out, rng)


@lru_cache(maxsize=65536)
def factorize(n: int) -> Factorization:
    """Trial division to 10^6, then seeded Pollard rho on the cofactor."""
    if not 1 <= n < _MAX_FACTOR:
        raise ValueError(f"factorize expects 1 <= n < 2^63, got {n}")
    found: dict[int, int] = {}
    m = n
    for q in (2, 3):
        while m % q == 0:
            found[q] = found.get(q, 0) + 1
            m //= q
    q = 5
    step = 2
    while q * q <= m and q <= _TRIAL_LIMIT:
        while m % q == 0:
            found[q] = found.get(q, 0) + 1
            m //= q
        q += step
        step = 6 - step
    if m > 1 and q * q > m:
        # trial division ran past sqrt(m), so the cofactor is prime
        found[m] = found.get(m, 0) + 1
    elif m > 1:
        _split(m, found, random.Random(0x5EED ^ n))
    return Factorization(n, tuple(sorted(found.items())))


def divisors(n: int) -> list[int]:
    divs = [1]
    for q, e in factorize(n):
        divs = [d * q**i for d in divs for i in range(e + 1)]
    return sorted(divs)


def square_divisors(n: int) -> list[int]:
    """All d >= 1 with d^2 | n."""
    n = abs(n)
    divs = [1]
    for q, e in factorize(n):
        divs = [d * q**i for d in divs for i in range(e // 2 + 1)]
    return sorted(divs)


def mobius(n: int) -> int:
    f = factorize(n)
    if any(e > 1 for _, e in f):
        return 0
    return -1 if len(f) % 2 else 1


def euler_phi(n: int) -> int:
    out = n
    for q, _ in factorize(n):
        out = out // q * (q - 1)
    return out


def is_discriminant(D: int) -> bool:
    return D % 4 in (0, 1)
