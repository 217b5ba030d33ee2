"""Singular-series constants: per-prime factors from matrix counts, truncated
Euler products, the aliquot level sequence, and simplex integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from .arith import PrimePower, factorize, is_prime, p_adic_valuation, primes_up_to
from .errors import BudgetExceeded, DomainError, Unstabilized
from .matcount import (
    MatrixConstraint,
    closed_count_row,
    count_constrained,
    gl2_order,
)

DEFAULT_Z = 10**4
CHECKPOINTS = (10**2, 10**3, 10**4)
# largest ell^r used when certifying a stabilized limit
LEVEL_BUDGET = 2**17
# enumeration bound for the aliquot level sequence, ell^(r d)
ALIQUOT_BUDGET = 2**22
# the aliquot product needs a phi(ell)^2 transfer matrix per prime
ALIQUOT_PRODUCT_CUTOFF = 400

KINDS = ("LT", "TWIN", "GM", "MEN", "MEG", "CYCLIC", "ALIQUOT")


@dataclass(frozen=True)
class ConstantKind:
    tag: str
    params: tuple = ()

    def __post_init__(self):
        tag = self.tag.upper()
        object.__setattr__(self, "tag", tag)
        if tag not in KINDS:
            raise DomainError(f"unknown constant kind {self.tag!r}")
        expected = {"LT": 1, "TWIN": 0, "GM": 1, "MEN": 1, "MEG": 2, "CYCLIC": 1, "ALIQUOT": 1}[tag]
        if len(self.params) != expected:
            raise DomainError(f"{tag} takes {expected} parameter(s), got {self.params}")
        if tag in ("GM", "CYCLIC") and not is_prime(self.params[0]):
            raise DomainError(f"{tag} needs a prime, got {self.params[0]}")
        if tag == "MEN" and self.params[0] < 2:
            raise DomainError("MEN needs N >= 2")
        if tag == "MEG":
            m, k = self.params
            if m < 1 or k < 2:
                raise DomainError("MEG needs m >= 1 and k >= 2")
        if tag == "ALIQUOT" and self.params[0] < 2:
            raise DomainError("ALIQUOT needs d >= 2")

    @classmethod
    def lt(cls, t: int):
        return cls("LT", (t,))

    @classmethod
    def twin(cls):
        return cls("TWIN")

    @classmethod
    def gm(cls, p: int):
        return cls("GM", (p,))

    @classmethod
    def men(cls, N: int):
        return cls("MEN", (N,))

    @classmethod
    def meg(cls, m: int, k: int):
        return cls("MEG", (m, k))

    @classmethod
    def cyclic(cls, p: int):
        return cls("CYCLIC", (p,))

    @classmethod
    def aliquot(cls, d: int):
        return cls("ALIQUOT", (d,))

    @property
    def group_order(self) -> int:
        if self.tag == "MEN":
            return self.params[0]
        if self.tag == "MEG":
            m, k = self.params
            return m * m * k
        raise AttributeError(f"{self.tag} has no group order")

    def bad_primes(self) -> frozenset[int]:
        """Primes whose factor may deviate from 1 by more than O(ell^-3/2)."""
        base = {2, 3}
        if self.tag == "LT" and self.params[0]:
            base |= set(factorize(abs(self.params[0])).primes())
        elif self.tag in ("GM", "CYCLIC"):
            p = self.params[0]
            base |= {p} | set(factorize(p - 1).primes())
        elif self.tag in ("MEN", "MEG"):
            base |= set(factorize(self.group_order).primes())
        return frozenset(base)

    def __str__(self):
        if not self.params:
            return self.tag
        return f"{self.tag}({','.join(map(str, self.params))})"


@dataclass
class TruncatedProduct:
    kind: ConstantKind
    z: int
    value: float
    exact_prefix: Fraction
    tail_estimate: float
    partials: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


# -- matrix counts at a level -------------------------------------------------


def _units(q: int, ell: int) -> np.ndarray:
    u = np.arange(q, dtype=np.int64)
    return u[u % ell != 0]


def _sum(arr: np.ndarray) -> int:
    return int(arr.astype(object).sum()) if arr.size else 0


def _gl2_trace_count(t: int, ell: int) -> int:
    """#{sigma in GL_2(F_ell) : tr = t}."""
    u = _units(ell, ell)
    return _sum(closed_count_row(np.full_like(u, t), u, ell, 1))


def _trace_det_shift_count(N: int, ell: int, r: int) -> int:
    """#{sigma in GL_2(Z/ell^r) : tr = det + 1 - N}."""
    u = _units(ell**r, ell)
    return _sum(closed_count_row(u + 1 - N, u, ell, r))


def _det_count(c: int, ell: int, s: int) -> int:
    """#{tau mod ell^s : det tau = c}."""
    if s == 0:
        return 1
    t = np.arange(ell**s, dtype=np.int64)
    return _sum(closed_count_row(t, np.full_like(t, c), ell, s))


def _shift_count_near_identity(N: int, ell: int, r: int, b: int) -> int:
    """#{sigma in GL_2(Z/ell^r) : tr = det + 1 - N, sigma = I mod ell^b}.

    With sigma = I + ell^b tau the condition becomes ell^(2b) det(tau) = N.
    """
    if b == 0:
        return _trace_det_shift_count(N, ell, r)
    if b >= r:
        return int(N % ell**r == 0)
    if r < 2 * b:
        return ell ** (4 * (r - b)) if N % ell**r == 0 else 0
    if N % ell ** (2 * b):
        return 0
    s = r - 2 * b
    return ell ** (4 * b) * _det_count(N // ell ** (2 * b) % ell**s, ell, s)


def _certify(level_value, ell: int, start: int, offset: int = 0) -> tuple[Fraction, int]:
    """Climb levels from ``start`` until two consecutive values agree.

    Evaluating level r enumerates residues mod ell^(r - offset); that is what
    the budget caps.
    """
    prev = None
    r = max(start, 1)
    while ell ** (r - offset) <= LEVEL_BUDGET:
        cur = level_value(r)
        if cur == prev:
            return cur, r - 1
        prev = cur
        r += 1
    raise Unstabilized(f"factor at ell={ell} not certified below {LEVEL_BUDGET}")


# -- aliquot ------------------------------------------------------------------


def _aliquot_kernel(ell: int, r: int) -> np.ndarray:
    """K[a, b] = |C(a + 1 - b, a, 1; ell^r)| over unit residues a, b."""
    u = _units(ell**r, ell)
    return closed_count_row(u[:, None] + 1 - u[None, :], u[:, None], ell, r)


def _trace_power(K: np.ndarray, d: int) -> int:
    if d == 2:
        return _sum((K * K.T).sum(axis=1))
    Ko = K.astype(object)
    P = Ko
    for _ in range(d - 2):
        P = P.dot(Ko)
    return int((P * Ko.T).sum())


def aliquot_level_value(ell: int, d: int, r: int) -> Fraction:
    """ell^(rd) #{sigma in GL_2(Z/ell^r)^d : det s_j + 1 - tr s_j = det s_(j+1)} / |GL_2|^d.

    The count factors through the determinants a_j: sigma_j then has
    trace a_j + 1 - a_(j+1), so the total is trace(K^d) for the kernel above.
    """
    if r == 0:
        return Fraction(1)
    K = _aliquot_kernel(ell, r)
    return Fraction(ell ** (r * d) * _trace_power(K, d), gl2_order(ell, r) ** d)


@dataclass(frozen=True)
class AliquotSequence:
    ell: int
    d: int
    values: tuple[Fraction, ...]
    limit: Fraction
    error_proxy: Fraction


def aliquot_local_sequence(ell: int, d: int, r_max: int) -> AliquotSequence:
    """Level values T_1..T_r_max; the last one is reported as the limit with
    |T_r - T_(r-1)| as its error proxy (T_0 = 1)."""
    if not is_prime(ell):
        raise DomainError(f"{ell} is not prime")
    if d < 2:
        raise DomainError("cycle length must be >= 2")
    if r_max < 0:
        raise DomainError("r_max must be >= 0")
    if ell ** (r_max * d) > ALIQUOT_BUDGET:
        raise BudgetExceeded(f"{ell}^({r_max}*{d}) exceeds the aliquot enumeration budget")
    values = tuple(aliquot_level_value(ell, d, r) for r in range(1, r_max + 1))
    seq = (Fraction(1),) + values
    err = abs(seq[-1] - seq[-2]) if len(seq) > 1 else Fraction(0)
    return AliquotSequence(ell, d, values, seq[-1], err)


def aliquot_max_level(ell: int, d: int) -> int:
    r = 0
    while ell ** ((r + 1) * d) <= ALIQUOT_BUDGET:
        r += 1
    return r


def parks_factor(ell: int) -> Fraction:
    """Reference closed form for the d = 2 aliquot factor; used only by tests."""
    num = (2 * ell**4 + 3 * ell**3) * (ell - 2) - (ell - 1) * (ell**4 - 2 * ell**3 - 4 * ell**2 + 1)
    return 1 - Fraction(num, (ell - 1) * (ell * ell - 1) ** 3)


# -- local factors ------------------------------------------------------------


def local_factor(kind: ConstantKind, ell: int) -> Fraction:
    """Exact per-prime factor of the singular series for ``kind``."""
    if not is_prime(ell):
        raise DomainError(f"{ell} is not prime")
    return _local_factor_with_level(kind, ell)[0]


def _local_factor_with_level(kind: ConstantKind, ell: int) -> tuple[Fraction, int]:
    tag = kind.tag
    gl = gl2_order(ell, 1)
    if tag == "LT":
        (t,) = kind.params
        return Fraction(ell * _gl2_trace_count(t, ell), gl), 1
    if tag == "TWIN":
        bad = _trace_det_shift_count(0, ell, 1)
        return Fraction(ell, ell - 1) * Fraction(gl - bad, gl), 1
    if tag == "GM":
        (p,) = kind.params
        if ell == p:
            return Fraction(1), 0
        level = PrimePower(ell, 1)
        good = count_constrained(
            MatrixConstraint(det=p, custom_predicate=lambda tr, det: (det + 1 - tr) % ell != 0, invertible_only=True),
            level,
        ).count
        total = count_constrained(MatrixConstraint(det=p, invertible_only=True), level).count
        return Fraction(ell, ell - 1) * Fraction(good, total), 1
    if tag == "CYCLIC":
        (p,) = kind.params
        if ell == p:
            return Fraction(1), 0
        level = PrimePower(ell, 1)
        good = count_constrained(
            MatrixConstraint(det=p, not_congruent_to_identity_mod=1, invertible_only=True), level
        ).count
        total = count_constrained(MatrixConstraint(det=p, invertible_only=True), level).count
        return Fraction(good, total), 1
    if tag == "MEN":
        (N,) = kind.params
        start = p_adic_valuation(N, ell) + 1
        if start == 1:
            # ell does not divide N: the count is already constant from r = 1
            return Fraction(ell * _trace_det_shift_count(N, ell, 1), gl), 1
        return _certify(
            lambda r: Fraction(ell**r * _trace_det_shift_count(N, ell, r), gl2_order(ell, r)), ell, start
        )
    if tag == "MEG":
        m, k = kind.params
        N = m * m * k
        a = p_adic_valuation(m, ell)

        def at_level(r):
            cnt = _shift_count_near_identity(N, ell, r, a) - _shift_count_near_identity(N, ell, r, a + 1)
            return Fraction(ell**r * cnt, gl2_order(ell, r))

        start = p_adic_valuation(N, ell) + 1
        if start == 1 and a == 0:
            return at_level(1), 1
        return _certify(at_level, ell, max(start, 2 * a + 2), offset=2 * a)
    if tag == "ALIQUOT":
        (d,) = kind.params
        r = max(1, min(aliquot_max_level(ell, d), 6))
        seq = aliquot_local_sequence(ell, d, r)
        return seq.limit, r
    raise DomainError(f"unhandled kind {kind}")


# -- archimedean pieces -------------------------------------------------------


def _gl_nodes(n: int = 2048):
    return np.polynomial.legendre.leggauss(n)


def _semicircle(t):
    return np.sqrt(np.clip(1.0 - t * t, 0.0, None))


def simplex_integral_with_error(d: int, m: int, weighted=None, samples: int = 2**16, seed: int = 0):
    """I_{d,m} = 2^(d-1) * integral over t_1 + ... + t_d = 0, |t_j| <= 1, of
    prod_{j in weighted} sqrt(1 - t_j^2) dt_1 ... dt_(d-1).

    Returns (value, standard_error); the error is 0 for the Gauss-Legendre
    rule used when d <= 3.
    """
    if not 2 <= d <= 6:
        raise DomainError("simplex integral supports 2 <= d <= 6")
    if not 0 <= m <= d:
        raise DomainError("need 0 <= m <= d")
    weighted = tuple(range(m)) if weighted is None else tuple(sorted(set(weighted)))
    if len(weighted) != m or any(not 0 <= j < d for j in weighted):
        raise DomainError(f"weighted coordinates {weighted} do not match m={m}")
    w = np.array([j in weighted for j in range(d)])
    scale = 2.0 ** (d - 1)
    x, wx = _gl_nodes()
    if d == 2:
        t1 = x
        vals = np.where(w[0], _semicircle(t1), 1.0) * np.where(w[1], _semicircle(-t1), 1.0)
        return scale * float(vals @ wx), 0.0
    if d == 3:
        # inner variable t2 ranges over [max(-1, -1 - t1), min(1, 1 - t1)]; that
        # length has a kink at t1 = 0, so the outer rule is split there
        total = 0.0
        for a, b in ((-1.0, 0.0), (0.0, 1.0)):
            t1 = ((b - a) / 2 * x + (a + b) / 2)[:, None]
            lo = np.maximum(-1.0, -1.0 - t1)
            hi = np.minimum(1.0, 1.0 - t1)
            half = (hi - lo) / 2
            t2 = lo + half * (x[None, :] + 1)
            t3 = -t1 - t2
            f = np.ones_like(t2)
            for j, tj in enumerate((np.broadcast_to(t1, t2.shape), t2, t3)):
                if w[j]:
                    f = f * _semicircle(tj)
            inner = (f * wx[None, :]).sum(axis=1) * half[:, 0]
            total += (b - a) / 2 * float(inner @ wx)
        return scale * total, 0.0
    reps = 16
    estimates = []
    for rep in range(reps):
        sob = qmc.Sobol(d - 1, scramble=True, seed=seed * 1000 + rep)
        pts = 2.0 * sob.random(samples) - 1.0
        last = -pts.sum(axis=1)
        ok = np.abs(last) <= 1.0
        coords = np.column_stack([pts, last])
        f = np.where(ok, 1.0, 0.0)
        for j in range(d):
            if w[j]:
                f = f * _semicircle(coords[:, j])
        estimates.append(2.0 ** (d - 1) * f.mean())
    est = np.array(estimates)
    return scale * float(est.mean()), scale * float(est.std(ddof=1) / math.sqrt(reps))


def simplex_integral(d: int, m: int, weighted=None) -> float:
    return simplex_integral_with_error(d, m, weighted)[0]


def aliquot_archimedean_factor(d: int) -> float:
    """(2^d / pi^d) times the simplex integral with every coordinate weighted."""
    return 2.0**d / math.pi**d * simplex_integral(d, d) / 2.0 ** (d - 1)


def archimedean_prefactor(kind: ConstantKind) -> float:
    if kind.tag == "LT":
        return 2.0 / math.pi
    if kind.tag == "ALIQUOT":
        return aliquot_archimedean_factor(kind.params[0])
    return 1.0


# -- Euler products -----------------------------------------------------------


def cyclic_closed_form(p: int) -> Fraction:
    """prod over ell | p-1 of (1 - 1/(ell (ell^2 - 1)))."""
    out = Fraction(1)
    for ell in factorize(p - 1).primes():
        out *= 1 - Fraction(1, ell * (ell * ell - 1))
    return out


def constant(kind: ConstantKind, z: int = DEFAULT_Z, checkpoints=CHECKPOINTS) -> TruncatedProduct:
    """Truncated singular series over primes ell <= z, ascending.

    Bad primes contribute exactly (``exact_prefix``); the rest are multiplied
    in floating point. ``tail_estimate`` bounds the relative effect of primes
    above z using the observed ell^(3/2) (ell - 1) decay constant.
    """
    if kind.tag == "CYCLIC":
        (p,) = kind.params
        exact = Fraction(1)
        for ell in factorize(p - 1).primes():
            if ell != p:
                exact *= local_factor(kind, ell)
        return TruncatedProduct(kind, z, float(exact), exact, 0.0, [(z, float(exact))], {"exact": True})
    pre = archimedean_prefactor(kind)
    eff_z = int(z)
    meta = {}
    if kind.tag == "ALIQUOT" and eff_z > ALIQUOT_PRODUCT_CUTOFF:
        eff_z = ALIQUOT_PRODUCT_CUTOFF
        meta["effective_cutoff"] = eff_z
    primes = primes_up_to(eff_z) if eff_z >= 2 else []
    bad = kind.bad_primes()
    exact = Fraction(1)
    generic = 1.0
    partials = []
    marks = sorted(c for c in checkpoints if c <= eff_z)
    k = 0
    decay = 0.0
    levels = {}
    for ell in primes:
        while k < len(marks) and ell > marks[k]:
            partials.append((marks[k], pre * float(exact) * generic))
            k += 1
        f, lvl = _local_factor_with_level(kind, ell)
        if lvl > 1:
            levels[ell] = lvl
        if ell in bad:
            exact *= f
        else:
            fv = float(f)
            generic *= fv
            if 2 * ell > eff_z:
                decay = max(decay, abs(fv - 1) * ell**1.5)
    while k < len(marks):
        partials.append((marks[k], pre * float(exact) * generic))
        k += 1
    value = pre * float(exact) * generic
    if not partials or partials[-1][0] != z:
        partials.append((z, value))
    # sum_{ell > z} ell^(-3/2) ~ 2 / (sqrt(z) log z)
    tail = decay * 2 / (math.sqrt(eff_z) * math.log(eff_z)) if eff_z >= 3 else float("nan")
    if levels:
        meta["certified_levels"] = levels
    return TruncatedProduct(kind, z, value, exact, tail, partials, meta)
