"""Binary quadratic forms, class numbers, and the Kronecker class number H(D)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .arith import factorize, is_discriminant, primes_up_to, square_divisors

_ENUM_LIMIT = 10**6


@dataclass(frozen=True)
class Discriminant:
    D: int

    def __post_init__(self):
        if self.D >= 0:
            raise ValueError(f"discriminant must be negative, got {self.D}")
        if not is_discriminant(self.D):
            raise ValueError(f"{self.D} is not 0 or 1 mod 4")

    @property
    def residue(self) -> int:
        return self.D % 4

    @property
    def factorization(self):
        return factorize(-self.D)

    def __int__(self):
        return self.D


@dataclass(frozen=True, order=True)
class QuadraticForm:
    a: int
    b: int
    c: int

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def is_reduced(self) -> bool:
        a, b, c = self.a, self.b, self.c
        if not abs(b) <= a <= c:
            return False
        if b < 0 and (a == -b or a == c):
            return False
        return True

    def __call__(self, x: int, y: int) -> int:
        return self.a * x * x + self.b * x * y + self.c * y * y


@dataclass(frozen=True)
class ClassNumberResult:
    h: int
    w: int
    forms: tuple[QuadraticForm, ...]


def _as_int(D) -> int:
    return D.D if isinstance(D, Discriminant) else int(D)


def _check_disc(D: int):
    if D >= 0 or not is_discriminant(D):
        raise ValueError(f"{D} is not a negative discriminant")


# -- N_D(m) -------------------------------------------------------------------


def sqrt_count_enum(D: int, m: int) -> int:
    """#{0 <= x < 2m : x^2 = D (mod 4m)} by direct enumeration."""
    x = np.arange(2 * m, dtype=object if 4 * m > 3 * 10**9 else np.int64)
    return int(np.count_nonzero((x * x - D) % (4 * m) == 0))


def _unit_sqrt_count(c: int, ell: int, e: int) -> int:
    """#{y mod ell^e : y^2 = c}, c a unit mod ell, e >= 1."""
    if ell != 2:
        c %= ell
        return 2 if pow(c, (ell - 1) // 2, ell) == 1 else 0
    if e == 1:
        return 1
    if e == 2:
        return 2 if c % 4 == 1 else 0
    return 4 if c % 8 == 1 else 0


def _sqrt_count_prime_power(D: int, ell: int, k: int) -> int:
    """#{x mod ell^k : x^2 = D (mod ell^k)}, lifted from residues mod ell."""
    q = ell**k
    D %= q
    if D == 0:
        return ell ** (k // 2)
    v = 0
    while D % ell == 0:
        D //= ell
        v += 1
    if v % 2:
        return 0
    return ell ** (v // 2) * _unit_sqrt_count(D, ell, k - v)


def prime_power_sqrt_count(D: int, ell: int, j: int) -> int:
    """N_D(ell^j) without enumeration."""
    if D % 4 in (2, 3):
        return 0
    if j == 0:
        return 1
    if ell == 2:
        # x mod 2^(j+1) with x^2 = D mod 2^(j+2): half the roots mod 2^(j+2)
        return _sqrt_count_prime_power(D, 2, j + 2) // 2
    # the mod-4 condition has exactly one root class mod 2
    return _sqrt_count_prime_power(D, ell, j)


def sqrt_count(D: int, m: int) -> int:
    """N_D(m) = #{0 <= x < 2m : x^2 = D (mod 4m)}.

    Enumerates when 4m <= 10^6; otherwise multiplies the prime-power counts
    obtained by Hensel lifting.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if D % 4 in (2, 3):
        return 0
    if 4 * m <= _ENUM_LIMIT:
        return sqrt_count_enum(D, m)
    out = 1
    for ell, e in factorize(m):
        out *= prime_power_sqrt_count(D, ell, e)
    return out


def sqrt_count_table(ell: int, j: int) -> np.ndarray:
    """tab[D mod 4*ell^j] = N_D(ell^j); depends only on that residue."""
    m = ell**j
    mod = 4 * m
    x = np.arange(2 * m, dtype=np.int64)
    return np.bincount((x * x) % mod, minlength=mod).astype(np.int64)


# -- reduced forms and class numbers ------------------------------------------


def reduced_forms(D: int, primitive: bool = True) -> list[QuadraticForm]:
    """Reduced forms (a, b, c) of discriminant D by exhaustive scan."""
    D = _as_int(D)
    _check_disc(D)
    forms = []
    amax = math.isqrt(-D // 3)
    for b in range(D % 2, amax + 1, 2):
        q = (b * b - D) // 4
        lo = max(b, 1)
        hi = math.isqrt(q)
        if hi < lo:
            continue
        a = np.arange(lo, hi + 1, dtype=np.int64)
        a = a[q % a == 0]
        for ai in a.tolist():
            c = q // ai
            if primitive and math.gcd(math.gcd(ai, b), c) != 1:
                continue
            forms.append(QuadraticForm(ai, b, c))
            if b != 0 and b != ai and ai != c:
                forms.append(QuadraticForm(ai, -b, c))
    return sorted(forms)


def reduced_primitive_forms(D) -> list[QuadraticForm]:
    return reduced_forms(D, primitive=True)


def unit_count(D: int) -> int:
    D = _as_int(D)
    return 6 if D == -3 else 4 if D == -4 else 2


@lru_cache(maxsize=1 << 17)
def _class_number(D: int) -> int:
    return len(reduced_forms(D, primitive=True))


def class_number(D) -> ClassNumberResult:
    D = _as_int(D)
    forms = tuple(reduced_primitive_forms(D))
    return ClassNumberResult(len(forms), unit_count(D), forms)


def class_number_h(D) -> int:
    D = _as_int(D)
    _check_disc(D)
    return _class_number(D)


@lru_cache(maxsize=1 << 17)
def _hurwitz(D: int) -> Fraction:
    total = Fraction(0)
    for d in square_divisors(-D):
        Dd = D // (d * d)
        if is_discriminant(Dd):
            total += Fraction(_class_number(Dd), unit_count(Dd))
    return total


def kronecker_class_number(D) -> Fraction:
    """H(D) = sum over d^2 | D with D/d^2 = 0,1 mod 4 of h(D/d^2)/w(D/d^2)."""
    D = _as_int(D)
    _check_disc(D)
    return _hurwitz(D)


def is_fundamental(D: int) -> bool:
    _check_disc(D)
    for d in square_divisors(-D):
        if d > 1 and is_discriminant(D // (d * d)):
            return False
    return True


# -- Euler product cross-check -----------------------------------------------


def cnf_local_factor(D: int, ell: int) -> float:
    """(1 + 1/ell)^-1 * sum_j N_D(ell^j)/ell^j, summed exactly to the
    stabilization point and closed off as a geometric tail."""
    nu = 0
    m = -D
    while m % ell == 0:
        m //= ell
        nu += 1
    total = Fraction(0)
    for j in range(nu + 2):
        total += Fraction(sqrt_count(D, ell**j), ell**j)
    # N_D(ell^j) is constant for j >= nu + 1
    tail = Fraction(sqrt_count(D, ell ** (nu + 1)), ell ** (nu + 1)) / (ell - 1)
    total += tail
    return float(total / (1 + Fraction(1, ell)))


def cnf_partial_product(D, z: float, checkpoints=()) -> float | tuple[float, list]:
    """Truncation of the Euler product for H(D) at primes ell <= z.

    Primes are taken in increasing order; the product only converges
    conditionally. With ``checkpoints`` the running values at those cutoffs
    are also returned.
    """
    D = _as_int(D)
    _check_disc(D)
    value = math.sqrt(-D) / (2 * math.pi)
    marks = sorted(checkpoints)
    partials = []
    if z >= 2:
        ps = primes_up_to(int(z))
        divs = {q for q, _ in factorize(-D)} | {2}
        # generic primes: factor is (1 - 1/l^2)^-1 (1 + (D|l)/l); use a
        # Legendre table lookup per prime via Euler's criterion
        k = 0
        for ell in ps:
            while k < len(marks) and ell > marks[k]:
                partials.append((marks[k], value))
                k += 1
            if ell in divs:
                value *= cnf_local_factor(D, ell)
            else:
                chi = pow(D % ell, (ell - 1) // 2, ell)
                chi = -1 if chi == ell - 1 else chi
                value *= (1 + chi / ell) / (1 - 1 / (ell * ell))
        while k < len(marks):
            partials.append((marks[k], value))
            k += 1
    else:
        partials = [(c, value) for c in marks]
    return (value, partials) if checkpoints else value
