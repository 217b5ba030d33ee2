"""Archimedean and ell-adic densities of Frobenius traces, and the exact
global masses obtained from Kronecker class numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .arith import PrimePower, is_prime, mobius, p_adic_valuation, square_divisors
from .errors import DomainError, Unstabilized
from .matcount import (
    BRUTE_LIMIT,
    count_fixed_trace_det,
    gl2_order,
    scalar_congruent_count,
)
from .quadform import kronecker_class_number

# compare every closed-formula local factor against enumeration when cheap
CROSS_CHECK = True
# extra levels tried when certifying a limit by two consecutive equal values
MAX_EXTRA_LEVELS = 8


@dataclass(frozen=True)
class LocalFactor:
    ell: int
    value: Fraction
    stabilized_at: int | None
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def delta(self) -> Fraction:
        return self.value - 1

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True, order=True)
class GroupShape:
    """Z/m x Z/mk, of order m^2 k."""

    m: int
    k: int

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise DomainError(f"invalid group shape ({self.m}, {self.k})")

    @property
    def N(self) -> int:
        return self.m * self.m * self.k

    @property
    def is_cyclic(self) -> bool:
        return self.m == 1

    def __str__(self):
        return f"{self.m},{self.k}"


def _check_prime(p: int):
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")


def in_hasse_interval(t: int, p: int) -> bool:
    return t * t < 4 * p


def archimedean_density(t: int, p: int) -> float:
    """Semicircle density (1/(pi sqrt p)) sqrt(1 - (t / 2 sqrt p)^2)."""
    _check_prime(p)
    if not in_hasse_interval(t, p):
        return 0.0
    return math.sqrt(1 - t * t / (4 * p)) / (math.pi * math.sqrt(p))


# -- ell-adic densities -------------------------------------------------------


def _normalizer(ell: int, r: int) -> Fraction:
    """ell^r phi(ell^r) / |GL_2(Z/ell^r)|."""
    return Fraction(ell**r * (ell - 1) * ell ** (r - 1), gl2_order(ell, r))


def _nilpotent_limit(ell: int) -> Fraction:
    # D = 0: N_0(ell^j) = ell^floor(j/2), so the series sums to 1/ell and
    # the limit is (1 + 1/ell) / (1 - 1/ell^2)
    return Fraction(ell, ell - 1)


def _density_n1(t: int, u: int, ell: int) -> LocalFactor:
    D = t * t - 4 * u
    if D == 0:
        return LocalFactor(ell, _nilpotent_limit(ell), None, {"nu": None})
    nu = p_adic_valuation(D, ell)
    r = nu + 1
    level = PrimePower(ell, r)
    count = count_fixed_trace_det(t, u, 1, level, "closed").count
    if CROSS_CHECK and level.value**4 <= BRUTE_LIMIT:
        brute = count_fixed_trace_det(t, u, 1, level, "bruteforce").count
        if brute != count:
            raise RuntimeError(f"closed/brute mismatch at {level}: {count} vs {brute}")
    return LocalFactor(ell, _normalizer(ell, r) * count, r, {"nu": nu})


def local_density(t: int, u: int, n: int, ell: int, require_unit_det: bool = True) -> LocalFactor:
    """f_ell(t, u, n): the limit of ell^r phi(ell^r) |C(t,u,n; ell^r)| / |GL_2|.

    Evaluated at r = nu_ell(t^2 - 4u) + 1, past which the normalized count
    is constant. Returns 0 when u, t are incompatible with sigma = I mod
    ell^nu_ell(n).
    """
    _check_prime(ell)
    if n < 1:
        raise DomainError("n must be positive")
    if require_unit_det and u % ell == 0:
        raise DomainError(f"determinant {u} is not a unit mod {ell}")
    a = p_adic_valuation(n, ell)
    if a == 0:
        return _density_n1(t, u, ell)
    la = ell**a
    if (u - 1) % la or (u + 1 - t) % (la * la):
        return LocalFactor(ell, Fraction(0), 2 * a, {"incompatible": True})
    D = t * t - 4 * u
    if D == 0:
        base = _density_n1((t - 2) // la, (u + 1 - t) // (la * la), ell)
        return LocalFactor(ell, base.value / la, None, {"nu": None})
    r = p_adic_valuation(D, ell) + 1
    level = PrimePower(ell, r)
    count = count_fixed_trace_det(t, u, n, level, "closed").count
    if CROSS_CHECK and level.value**4 <= BRUTE_LIMIT:
        brute = count_fixed_trace_det(t, u, n, level, "bruteforce").count
        if brute != count:
            raise RuntimeError(f"closed/brute mismatch at {level}: {count} vs {brute}")
    return LocalFactor(ell, _normalizer(ell, r) * count, r, {"nu": r - 1})


def _star_count(t: int, u: int, ell: int, r: int) -> int:
    """#{sigma mod ell^r : tr = t, det = u, sigma != 0 mod ell}."""
    return scalar_congruent_count(t, u, 1, 0, ell, r) - scalar_congruent_count(t, u, 0, 1, ell, r)


def local_density_star(t1: int, u1: int, ell: int) -> LocalFactor:
    """f*_ell(t1, u1, 1), the density restricted to sigma != 0 mod ell.

    Computed as f(t1,u1,1) - f(t1/ell, u1/ell^2, 1)/ell, and certified by
    counting directly at increasing levels until two consecutive normalized
    counts agree.
    """
    _check_prime(ell)
    value = _density_n1(t1, u1, ell).value
    if t1 % ell == 0 and u1 % (ell * ell) == 0:
        value -= _density_n1(t1 // ell, u1 // (ell * ell), ell).value / ell
    D = t1 * t1 - 4 * u1
    if D == 0:
        # the level sequence only converges (no plateau); the series value is exact
        return LocalFactor(ell, value, None, {"series_limit": True})
    start = p_adic_valuation(D, ell) + 1
    prev = None
    for r in range(start, start + MAX_EXTRA_LEVELS + 1):
        cur = _normalizer(ell, r) * _star_count(t1, u1, ell, r)
        if cur == prev:
            if cur != value:
                raise RuntimeError(f"f* mismatch at ell={ell}: {cur} vs {value}")
            return LocalFactor(ell, value, r - 1)
        prev = cur
    raise Unstabilized(f"f*_{ell}({t1},{u1}) not certified within {MAX_EXTRA_LEVELS} levels")


def group_local_density(shape: GroupShape, p: int, ell: int) -> LocalFactor:
    """f_ell(G, p) = f_ell(t, p, m) - f_ell(t, p, ell m), t = p + 1 - |G|."""
    _check_prime(p)
    _check_prime(ell)
    m = shape.m
    t = p + 1 - shape.N
    a = p_adic_valuation(m, ell)
    if (p - 1) % ell**a:
        return LocalFactor(ell, Fraction(0), None, {"weil_obstruction": True})
    full = local_density(t, p, m, ell)
    finer = local_density(t, p, ell * m, ell)
    levels = [x for x in (full.stabilized_at, finer.stabilized_at) if x is not None]
    return LocalFactor(ell, full.value - finer.value, max(levels) if levels else None)


# -- global masses ------------------------------------------------------------


def deuring_mass(t: int, p: int) -> Fraction:
    """Probability that a random Weierstrass equation over F_p has trace t."""
    _check_prime(p)
    if not in_hasse_interval(t, p):
        return Fraction(0)
    return kronecker_class_number(t * t - 4 * p) / p


def full_torsion_mass(t: int, n: int, p: int) -> Fraction:
    """Probability of trace t together with full n-torsion, H(D/n^2)/p."""
    _check_prime(p)
    if n < 1:
        raise DomainError("n must be positive")
    if not in_hasse_interval(t, p) or (p - 1) % n or (p + 1 - t) % (n * n):
        return Fraction(0)
    D = t * t - 4 * p
    if D % (n * n):
        return Fraction(0)
    Dn = D // (n * n)
    if Dn % 4 in (2, 3):
        return Fraction(0)
    return kronecker_class_number(Dn) / p


def schoof_group_mass(shape: GroupShape, p: int) -> Fraction:
    """Probability that E(F_p) is isomorphic to Z/m x Z/mk."""
    _check_prime(p)
    t = p + 1 - shape.N
    if not in_hasse_interval(t, p):
        return Fraction(0)
    total = Fraction(0)
    for j in square_divisors(shape.k):
        mu = mobius(j)
        if mu:
            total += mu * full_torsion_mass(t, j * shape.m, p)
    return total


def hasse_shapes(p: int) -> list[GroupShape]:
    """All (m, k) with m | p-1 and m^2 k inside the Hasse interval."""
    _check_prime(p)
    lo = p + 1 - math.isqrt(4 * p)
    hi = p + 1 + math.isqrt(4 * p)
    out = []
    for N in range(max(lo, 1), hi + 1):
        if not in_hasse_interval(p + 1 - N, p):
            continue
        m = 1
        while m * m <= N:
            if N % (m * m) == 0 and (p - 1) % m == 0:
                out.append(GroupShape(m, N // (m * m)))
            m += 1
    return out
