"""Exhaustive census of short Weierstrass equations y^2 = x^3 + ax + b over F_p.

Point counts for all p^2 pairs come from one matrix product against the
Legendre table. Group shapes are constant on isomorphism classes
(a, b) ~ (u^4 a, u^6 b), so the full-torsion tests run once per class, using
division polynomials evaluated at every x in F_p.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np

from .arith import factorize, is_prime, legendre_table
from .density import GroupShape
from .errors import DomainError

# pairs processed per block in the division-polynomial pass
_CHUNK = 96


@dataclass(frozen=True)
class CurveRecord:
    p: int
    a: int
    b: int
    N: int
    t: int
    shape: GroupShape

    def to_json(self) -> str:
        return json.dumps(
            {"p": self.p, "a": self.a, "b": self.b, "N": self.N, "t": self.t,
             "m": self.shape.m, "k": self.shape.k}
        )


@dataclass(frozen=True)
class TraceMod:
    """Statistic: is a_p(E) = t (mod modulus)?"""

    modulus: int
    t: int

    def __post_init__(self):
        if self.modulus < 1:
            raise DomainError("modulus must be >= 1")

    def __str__(self):
        return f"trace_mod({self.modulus},{self.t})"


STATISTICS = ("trace", "group", "cyclic", "prime_order")


@dataclass(frozen=True)
class EmpiricalDistribution:
    p: int
    statistic: object
    masses: dict
    support_size: int

    def mass(self, key) -> Fraction:
        return self.masses.get(key, Fraction(0))


def _check_field(p: int):
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    if p < 5:
        raise DomainError("short Weierstrass census needs p >= 5")


def is_singular(p: int, a: int, b: int) -> bool:
    return (4 * a**3 + 27 * b * b) % p == 0


def nonsingular_pairs(p: int) -> Iterator[tuple[int, int]]:
    """All (a, b) in F_p^2 with 4a^3 + 27b^2 != 0, lexicographic."""
    _check_field(p)
    for a in range(p):
        a3 = 4 * a**3
        for b in range(p):
            if (a3 + 27 * b * b) % p:
                yield a, b


def nonsingular_mask(p: int) -> np.ndarray:
    _check_field(p)
    e = np.arange(p, dtype=np.int64)
    a3 = (4 * (e**3 % p)) % p
    b2 = (27 * (e * e % p)) % p
    return (a3[:, None] + b2[None, :]) % p != 0


def count_nonsingular_pairs(p: int) -> int:
    return int(np.count_nonzero(nonsingular_mask(p)))


def point_count(p: int, a: int, b: int) -> int:
    """#E(F_p) = p + 1 + sum_x chi(x^3 + ax + b)."""
    _check_field(p)
    a %= p
    b %= p
    if is_singular(p, a, b):
        raise DomainError(f"y^2 = x^3 + {a}x + {b} is singular mod {p}")
    chi = legendre_table(p)
    x = np.arange(p, dtype=np.int64)
    return p + 1 + int(chi[(x * x % p * x + a * x + b) % p].sum())


# -- single-curve group structure by point orders -----------------------------


def _ec_add(P, Q, a, p):
    if P is None:
        return Q
    if Q is None:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % p == 0:
            return None
        lam = (3 * x1 * x1 + a) * pow(2 * y1, -1, p) % p
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
    x3 = (lam * lam - x1 - x2) % p
    return x3, (lam * (x1 - x3) - y1) % p


def _ec_mul(n, P, a, p):
    R = None
    while n:
        if n & 1:
            R = _ec_add(R, P, a, p)
        P = _ec_add(P, P, a, p)
        n >>= 1
    return R


def _point_order(P, N, primes, a, p):
    order = N
    for q in primes:
        while order % q == 0 and _ec_mul(order // q, P, a, p) is None:
            order //= q
    return order


def affine_points(p: int, a: int, b: int) -> list[tuple[int, int]]:
    roots: dict[int, list[int]] = {}
    for y in range(p):
        roots.setdefault(y * y % p, []).append(y)
    return [(x, y) for x in range(p) for y in roots.get((x**3 + a * x + b) % p, ())]


def group_shape(p: int, a: int, b: int) -> GroupShape:
    """(m, k) with E(F_p) = Z/m x Z/mk, from the exponent of the group.

    Every point's order is computed (with early exit through the prime
    factors of N); the exponent is their lcm and m = N / exponent.
    """
    _check_field(p)
    a %= p
    b %= p
    if is_singular(p, a, b):
        raise DomainError(f"y^2 = x^3 + {a}x + {b} is singular mod {p}")
    pts = affine_points(p, a, b)
    N = len(pts) + 1
    primes = factorize(N).primes()
    exponent = 1
    for P in pts:
        exponent = math.lcm(exponent, _point_order(P, N, primes, a, p))
        if exponent == N:
            break
    m = N // exponent
    return GroupShape(m, N // (m * m))


# -- bulk census --------------------------------------------------------------


def _cubic_value_counts(p: int) -> np.ndarray:
    """CNT[a, v] = #{x in F_p : x^3 + a x = v}."""
    x = np.arange(p, dtype=np.int64)
    x3 = x * x % p * x % p
    cnt = np.zeros((p, p), dtype=np.int64)
    for a in range(p):
        cnt[a] = np.bincount((x3 + a * x) % p, minlength=p)
    return cnt


def _point_counts(p: int) -> np.ndarray:
    """N[a, b] for every pair (singular ones included, meaningless there)."""
    chi = legendre_table(p).astype(np.float64)
    cnt = _cubic_value_counts(p).astype(np.float64)
    idx = (np.arange(p)[:, None] + np.arange(p)[None, :]) % p
    shifted = chi[idx]  # shifted[b, v] = chi(v + b)
    # S[a, b] = sum_v CNT[a, v] chi(v + b); integers well below 2^53
    S = cnt @ shifted.T
    return p + 1 + np.rint(S).astype(np.int64)


def _orbit_labels(p: int) -> np.ndarray:
    """Smallest flat index a*p + b in each orbit of (a, b) -> (u^4 a, u^6 b)."""
    g = _generator(p)
    g4, g6 = pow(g, 4, p), pow(g, 6, p)
    e = np.arange(p, dtype=np.int64)
    step = ((g4 * e % p)[:, None] * p + (g6 * e % p)[None, :]).ravel()
    label = np.arange(p * p, dtype=np.int64)
    span = 1
    while span < p - 1:
        label = np.minimum(label, label[step])
        step = step[step]
        span *= 2
    return label


def _generator(p: int) -> int:
    qs = factorize(p - 1).primes()
    for g in range(2, p):
        if all(pow(g, (p - 1) // q, p) != 1 for q in qs):
            return g
    return 1


def _psi_tilde(p: int, a: np.ndarray, b: np.ndarray, x: np.ndarray, n_max: int) -> list:
    """Reduced division polynomial values psi~_n(x) for n <= n_max.

    psi~_n = psi_n for odd n and psi_n / (2y) for even n, so everything is a
    polynomial in x; F = 4(x^3 + ax + b) = (2y)^2 appears in the odd step.
    """
    def mul(*arrs):
        out = arrs[0]
        for arr in arrs[1:]:
            out = out * arr % p
        return out

    x2 = x * x % p
    x3 = x2 * x % p
    F = 4 * ((x3 + a * x + b) % p) % p
    F2 = F * F % p
    psi = [np.zeros_like(x2), np.ones_like(x2), np.ones_like(x2)]
    if n_max >= 3:
        psi.append((3 * x2 % p * x2 + 6 * a % p * x2 + 12 * b % p * x - a * a) % p)
    if n_max >= 4:
        x4 = x2 * x2 % p
        x6 = x4 * x2 % p
        inner = (x6 + 5 * a % p * x4 + 20 * b % p * x3 - 5 * (a * a % p) % p * x2
                 - 4 * (a * b % p) % p * x - 8 * (b * b % p) - a * a % p * a) % p
        psi.append(2 * inner % p)
    for n in range(5, n_max + 1):
        m = n // 2
        if n % 2:
            left = mul(psi[m + 2], psi[m], psi[m], psi[m])
            right = mul(psi[m - 1], psi[m + 1], psi[m + 1], psi[m + 1])
            if m % 2 == 0:
                left = left * F2 % p
            else:
                right = right * F2 % p
            psi.append((left - right) % p)
        else:
            inner = (mul(psi[m + 2], psi[m - 1], psi[m - 1]) - mul(psi[m - 2], psi[m + 1], psi[m + 1])) % p
            psi.append(psi[m] * inner % p)
    return psi


def torsion_counts(p: int, a: np.ndarray, b: np.ndarray, ns: list[int]) -> dict[int, np.ndarray]:
    """#E[n](F_p) for each n in ``ns`` and each curve (a[i], b[i])."""
    chi = legendre_table(p)
    x = np.arange(p, dtype=np.int64)[None, :]
    a = np.asarray(a, dtype=np.int64)[:, None]
    b = np.asarray(b, dtype=np.int64)[:, None]
    f = (x * x % p * x + a * x + b) % p
    pts_over_x = 1 + chi[f]
    psi = _psi_tilde(p, a, b, x, max(max(ns), 2))
    out = {}
    for n in ns:
        if n == 1:
            out[n] = np.ones(a.shape[0], dtype=np.int64)
            continue
        zero = psi[n] == 0
        if n % 2 == 0:
            zero = zero | (f == 0)
        out[n] = 1 + (pts_over_x * zero).sum(axis=1)
    return out


def _noncyclic_part(p: int, a: np.ndarray, b: np.ndarray, N: np.ndarray) -> np.ndarray:
    """m for each curve: the largest m with m | p-1, m^2 | N and E[m] rational."""
    m = np.ones(len(a), dtype=np.int64)
    for ell, e in factorize(p - 1):
        k = 1
        alive = np.ones(len(a), dtype=bool)
        while k <= e:
            n = ell**k
            alive &= N % (n * n) == 0
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            full = np.zeros(len(a), dtype=bool)
            for start in range(0, idx.size, _CHUNK):
                sel = idx[start : start + _CHUNK]
                cnt = torsion_counts(p, a[sel], b[sel], [n])[n]
                full[sel] = cnt == n * n
            alive &= full
            m[alive] *= ell
            k += 1
    return m


class Census:
    """All nonsingular Weierstrass pairs over F_p with their invariants."""

    def __init__(self, p: int):
        _check_field(p)
        self.p = p
        self.mask = nonsingular_mask(p)
        N = _point_counts(p)
        labels = _orbit_labels(p)
        flat_mask = self.mask.ravel()
        reps = np.unique(labels[flat_mask])
        ra, rb = reps // p, reps % p
        rN = N.ravel()[reps]
        rm = _noncyclic_part(p, ra, rb, rN)
        m_full = np.zeros(p * p, dtype=np.int64)
        m_full[reps] = rm
        m_full = m_full[labels]
        self.N = N
        self.t = p + 1 - N
        self.m = np.where(self.mask, m_full.reshape(p, p), 0)
        self.pair_count = int(np.count_nonzero(self.mask))

    def shape_at(self, a: int, b: int) -> GroupShape:
        m = int(self.m[a % self.p, b % self.p])
        return GroupShape(m, int(self.N[a % self.p, b % self.p]) // (m * m))

    def records(self) -> Iterator[CurveRecord]:
        p = self.p
        for a, b in zip(*np.nonzero(self.mask)):
            a, b = int(a), int(b)
            N = int(self.N[a, b])
            yield CurveRecord(p, a, b, N, p + 1 - N, self.shape_at(a, b))

    def _tally(self, keys: np.ndarray) -> dict:
        vals, counts = np.unique(keys[self.mask], return_counts=True)
        return dict(zip(vals.tolist(), counts.tolist()))

    def counts(self, statistic) -> dict:
        """Pair counts per value of ``statistic``."""
        if statistic == "trace":
            return self._tally(self.t)
        if statistic == "group":
            key = self.m * (4 * self.p) + self.N
            out = {}
            for code, c in self._tally(key).items():
                m, N = divmod(code, 4 * self.p)
                out[GroupShape(m, N // (m * m))] = c
            return out
        if statistic == "cyclic":
            return {bool(k): v for k, v in self._tally(self.m == 1).items()}
        if statistic == "prime_order":
            prime = np.vectorize(is_prime, otypes=[bool])(self.N)
            return {bool(k): v for k, v in self._tally(prime).items()}
        if isinstance(statistic, TraceMod):
            hit = (self.t - statistic.t) % statistic.modulus == 0
            return {bool(k): v for k, v in self._tally(hit).items()}
        raise DomainError(f"unknown statistic {statistic!r}")

    def distribution(self, statistic) -> EmpiricalDistribution:
        total = self.pair_count
        counts = self.counts(statistic)
        masses = {k: Fraction(v, total) for k, v in sorted(counts.items(), key=lambda kv: _sort_key(kv[0]))}
        return EmpiricalDistribution(self.p, statistic, masses, len(masses))


def _sort_key(key):
    if isinstance(key, GroupShape):
        return (key.N, key.m)
    return (0, key) if isinstance(key, (int, bool)) else (1, str(key))


@lru_cache(maxsize=4)
def census(p: int) -> Census:
    return Census(p)


def parse_statistic(text: str):
    text = text.strip().lower()
    if text in STATISTICS:
        return text
    if text.startswith("trace_mod"):
        inner = text[len("trace_mod"):].strip("()")
        try:
            modulus, t = (int(v) for v in inner.split(","))
        except ValueError:
            raise DomainError(f"expected trace_mod(N,t), got {text!r}") from None
        return TraceMod(modulus, t)
    raise DomainError(f"unknown statistic {text!r}")


def empirical_distribution(p: int, statistic) -> EmpiricalDistribution:
    """Exact masses of ``statistic`` under the uniform measure on nonsingular pairs."""
    if isinstance(statistic, str):
        statistic = parse_statistic(statistic)
    return census(p).distribution(statistic)
