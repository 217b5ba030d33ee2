"""Counting 2x2 matrices over Z/ell^r with trace, determinant and congruence
constraints.

Two independent routes are provided: exhaustive enumeration (the oracle,
limited to ell^(4r) <= 2^24) and closed formulas built from the square-root
counts N_D(ell^j).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .arith import PrimePower, p_adic_valuation
from .errors import BudgetExceeded, DomainError, InfeasibleLevel, Unstabilized
from .quadform import prime_power_sqrt_count, sqrt_count_table

BRUTE_LIMIT = 2**24
# (t, u) grid size allowed for the closed path when neither trace nor det is fixed
CLOSED_GRID_LIMIT = 2**22


@dataclass(frozen=True)
class MatrixConstraint:
    """Conditions on sigma mod ell^r.

    ``custom_predicate`` receives integer arrays (trace, det) of residues and
    returns a boolean array of the same shape.
    """

    trace: int | None = None
    det: int | None = None
    congruent_to_identity_mod: int | None = None
    not_congruent_to_identity_mod: int | None = None
    exclude_zero_mod_ell: bool = False
    custom_predicate: Callable | None = None
    invertible_only: bool = False

    def check_level(self, level: PrimePower):
        for lvl in (self.congruent_to_identity_mod, self.not_congruent_to_identity_mod):
            if lvl is not None and not 0 <= lvl <= level.r:
                raise DomainError(f"congruence level {lvl} outside 0..{level.r}")


@dataclass(frozen=True)
class CountResult:
    count: int
    level: PrimePower
    method: str
    metadata: dict = field(default_factory=dict, compare=False)

    def __int__(self):
        return self.count


def gl2_order(ell: int, r: int) -> int:
    if r < 1:
        raise DomainError("r must be >= 1")
    return ell ** (4 * (r - 1)) * (ell * ell - 1) * (ell * ell - ell)


def _discriminant_valuation(D: int, ell: int) -> float:
    return float("inf") if D == 0 else p_adic_valuation(D, ell)


# -- closed formulas ----------------------------------------------------------


def closed_count_n1(t: int, u: int, ell: int, r: int) -> int:
    """|C(t, u, 1; ell^r)| from the square-root counts of D = t^2 - 4u.

    Valid for every residue u, units or not. When ell^r | D the inner sum
    simply runs to j = r.
    """
    if r == 0:
        return 1
    q = ell**r
    t %= q
    u %= q
    D = t * t - 4 * u
    total = ell ** (2 * r)
    prev = 1
    for j in range(1, r + 1):
        cur = prime_power_sqrt_count(D, ell, j)
        if cur != prev:
            total += ell ** (2 * r - j) * (cur - prev)
        prev = cur
    return total


@lru_cache(maxsize=64)
def closed_count_table(ell: int, r: int) -> np.ndarray:
    """T[t, u] = |C(t, u, 1; ell^r)| for all residues, vectorized."""
    q = ell**r
    if q * q > CLOSED_GRID_LIMIT:
        raise BudgetExceeded(f"closed table at {ell}^{r} too large")
    t = np.arange(q, dtype=np.int64)[:, None]
    u = np.arange(q, dtype=np.int64)[None, :]
    D = t * t - 4 * u
    total = np.full((q, q), ell ** (2 * r), dtype=np.int64)
    prev = np.ones((q, q), dtype=np.int64)
    for j in range(1, r + 1):
        tab = sqrt_count_table(ell, j)
        cur = tab[D % len(tab)]
        total += ell ** (2 * r - j) * (cur - prev)
        prev = cur
    total.flags.writeable = False
    return total


def closed_count_row(t: np.ndarray | int, u: np.ndarray | int, ell: int, r: int) -> np.ndarray:
    """Vectorized |C(t, u, 1; ell^r)| over broadcast arrays t, u."""
    t = np.asarray(t, dtype=np.int64) % ell**r
    u = np.asarray(u, dtype=np.int64) % ell**r
    D = t * t - 4 * u
    total = np.full(np.broadcast(t, u).shape, ell ** (2 * r), dtype=np.int64)
    prev = np.ones_like(total)
    for j in range(1, r + 1):
        tab = sqrt_count_table(ell, j)
        cur = tab[D % len(tab)]
        total += ell ** (2 * r - j) * (cur - prev)
        prev = cur
    return total


def scalar_congruent_count(t: int, u: int, s: int, a: int, ell: int, r: int) -> int:
    """#{sigma mod ell^r : sigma = s*I mod ell^a, tr = t, det = u}.

    Writing sigma = s*I + ell^a * tau reduces the problem to trace and
    determinant conditions on tau at level ell^(r-a).
    """
    if a == 0:
        return closed_count_n1(t, u, ell, r)
    q = ell**r
    if r <= a:
        return int((2 * s - t) % q == 0 and (s * s - u) % q == 0)
    la = ell**a
    if (t - 2 * s) % la:
        return 0
    w = u - s * t + s * s
    if r < 2 * a:
        return ell ** (3 * (r - a)) if w % q == 0 else 0
    if w % ell ** (2 * a):
        return 0
    t1 = (t - 2 * s) // la
    u1 = w // ell ** (2 * a)
    step = ell ** (r - 2 * a)
    return sum(closed_count_n1(t1, u1 % step + i * step, ell, r - a) for i in range(la))


def _closed_fixed(t: int, u: int, n: int, ell: int, r: int) -> tuple[int, dict]:
    a = p_adic_valuation(n, ell)
    D = t * t - 4 * u
    nu = _discriminant_valuation(D, ell)
    meta = {"nu": None if nu == float("inf") else int(nu)}
    if a == 0:
        meta["certified_level"] = max(r, int(nu) + 1) if nu != float("inf") else None
        return closed_count_n1(t, u, ell, r), meta
    if r <= nu:
        raise Unstabilized(
            f"closed count for n={n} needs r > nu_{ell}(t^2-4u) = {nu}, got r={r}"
        )
    meta["certified_level"] = r
    la = ell**a
    compatible = (u - 1) % la == 0 and (u + 1 - t) % (la * la) == 0
    if compatible:
        t1 = (t - 2) // la
        u1 = (u + 1 - t) // (la * la)
        return la * closed_count_n1(t1, u1, ell, r - a), meta
    if r >= 2 * a:
        return 0, meta
    return scalar_congruent_count(t, u, 1, a, ell, r), meta


# -- brute force --------------------------------------------------------------


@lru_cache(maxsize=8)
def _trace_det(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened (tr, det) for all q^4 matrices, lexicographic in (a,b,c,d)."""
    if q**4 > BRUTE_LIMIT:
        raise BudgetExceeded(f"brute force over {q}^4 matrices exceeds 2^24")
    e = np.arange(q, dtype=np.int64)
    a = e[:, None, None, None]
    b = e[None, :, None, None]
    c = e[None, None, :, None]
    d = e[None, None, None, :]
    tr = np.broadcast_to((a + d) % q, (q, q, q, q)).astype(np.int32).ravel()
    det = ((a * d - b * c) % q).astype(np.int32).ravel()
    tr.flags.writeable = False
    det.flags.writeable = False
    return tr, det


@lru_cache(maxsize=32)
def bruteforce_table(ell: int, r: int, identity_level: int = 0) -> np.ndarray:
    """B[t, u] = number of matrices mod ell^r, congruent to I mod
    ell^identity_level, with trace t and det u."""
    q = ell**r
    tr, det = _trace_det(q)
    key = tr.astype(np.int64) * q + det
    if identity_level:
        key = key[_scalar_mask(q, 1, ell ** min(identity_level, r))]
    tab = np.bincount(key, minlength=q * q).reshape(q, q)
    tab.flags.writeable = False
    return tab


def _scalar_mask(q: int, s: int, mod: int) -> np.ndarray:
    """Mask of matrices congruent to s*I modulo ``mod`` (flattened)."""
    e = np.arange(q, dtype=np.int64)
    diag = (e - s) % mod == 0
    off = e % mod == 0
    mask = (
        diag[:, None, None, None]
        & off[None, :, None, None]
        & off[None, None, :, None]
        & diag[None, None, None, :]
    )
    return mask.ravel()


def _brute_count(constraint: MatrixConstraint, level: PrimePower) -> int:
    ell, r = level.ell, level.r
    q = level.value
    tr, det = _trace_det(q)
    mask = np.ones(tr.shape, dtype=bool)
    if constraint.trace is not None:
        mask &= tr == constraint.trace % q
    if constraint.det is not None:
        mask &= det == constraint.det % q
    if constraint.invertible_only:
        mask &= det % ell != 0
    if constraint.congruent_to_identity_mod:
        mask &= _scalar_mask(q, 1, ell**constraint.congruent_to_identity_mod)
    if constraint.not_congruent_to_identity_mod is not None:
        mask &= ~_scalar_mask(q, 1, ell**constraint.not_congruent_to_identity_mod)
    if constraint.exclude_zero_mod_ell:
        mask &= ~_scalar_mask(q, 0, ell)
    if constraint.custom_predicate is not None:
        mask &= np.asarray(constraint.custom_predicate(tr, det), dtype=bool)
    return int(np.count_nonzero(mask))


# -- public operations --------------------------------------------------------


def count_fixed_trace_det(t: int, u: int, n: int, level: PrimePower, mode: str = "closed") -> CountResult:
    """Matrices mod ell^r with trace t, det u and sigma = I mod ell^nu_ell(n)."""
    if n < 1:
        raise DomainError("n must be positive")
    ell, r = level.ell, level.r
    if mode == "bruteforce":
        q = level.value
        tab = bruteforce_table(ell, r, min(p_adic_valuation(n, ell), r))
        return CountResult(int(tab[t % q, u % q]), level, "bruteforce")
    if mode != "closed":
        raise DomainError(f"unknown mode {mode!r}")
    count, meta = _closed_fixed(t, u, n, ell, r)
    return CountResult(count, level, "closed_formula", meta)


def _per_class_closed(constraint: MatrixConstraint, ell: int, r: int, t: int, u: int) -> int:
    a = constraint.congruent_to_identity_mod or 0
    b = constraint.not_congruent_to_identity_mod
    if b is not None and b <= a:
        return 0
    total = scalar_congruent_count(t, u, 1, a, ell, r)
    if b is not None:
        total -= scalar_congruent_count(t, u, 1, b, ell, r)
    if constraint.exclude_zero_mod_ell and a == 0:
        total -= scalar_congruent_count(t, u, 0, 1, ell, r)
    return total


def _closed_count(constraint: MatrixConstraint, level: PrimePower) -> int:
    ell, r = level.ell, level.r
    q = level.value
    ts = [constraint.trace % q] if constraint.trace is not None else None
    us = [constraint.det % q] if constraint.det is not None else None
    if ts is None and us is None and q * q > CLOSED_GRID_LIMIT:
        raise InfeasibleLevel(f"no feasible counting path at {level}")
    t_arr = np.array(ts if ts is not None else range(q), dtype=np.int64)
    u_arr = np.array(us if us is not None else range(q), dtype=np.int64)
    T, U = np.meshgrid(t_arr, u_arr, indexing="ij")
    keep = np.ones(T.shape, dtype=bool)
    if constraint.invertible_only:
        keep &= U % ell != 0
    if constraint.custom_predicate is not None:
        keep &= np.asarray(constraint.custom_predicate(T, U), dtype=bool)
    simple = (
        not constraint.congruent_to_identity_mod
        and constraint.not_congruent_to_identity_mod is None
        and not constraint.exclude_zero_mod_ell
    )
    if simple:
        counts = closed_count_row(T[keep], U[keep], ell, r)
        return int(counts.astype(object).sum())
    return sum(
        _per_class_closed(constraint, ell, r, int(t), int(u))
        for t, u in zip(T[keep].tolist(), U[keep].tolist())
    )


def count_constrained(constraint: MatrixConstraint, level: PrimePower, method: str | None = None) -> CountResult:
    """Exact count of matrices mod ell^r satisfying ``constraint``.

    Enumerates when ell^(4r) <= 2^24 unless ``method="closed"`` is forced;
    otherwise sums closed-formula counts over the admissible (trace, det)
    classes.
    """
    constraint.check_level(level)
    if level.r == 0:
        ok = True
        if constraint.custom_predicate is not None:
            ok = bool(np.asarray(constraint.custom_predicate(np.zeros(1, int), np.zeros(1, int)))[0])
        if constraint.not_congruent_to_identity_mod is not None:
            ok = False
        return CountResult(int(ok), level, "bruteforce")
    if method is None:
        method = "bruteforce" if level.value**4 <= BRUTE_LIMIT else "closed_formula"
    if method == "bruteforce":
        return CountResult(_brute_count(constraint, level), level, "bruteforce")
    if method not in ("closed", "closed_formula"):
        raise DomainError(f"unknown method {method!r}")
    return CountResult(_closed_count(constraint, level), level, "closed_formula")


def count_crt(per_prime_constraints: Mapping[PrimePower, MatrixConstraint], q: int) -> int:
    """Product of prime-power counts; the modulus must match the given levels."""
    prod = 1
    seen = set()
    for level in per_prime_constraints:
        if level.ell in seen:
            raise DomainError(f"prime {level.ell} given twice")
        seen.add(level.ell)
        prod *= level.value
    if prod != q:
        raise DomainError(f"prime powers multiply to {prod}, not {q}")
    out = 1
    for level, c in per_prime_constraints.items():
        out *= count_constrained(c, level).count
    return out
