"""Root counts, quadratic character sums and square-form detection for
multivariate integer polynomials modulo primes and prime powers."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import reduce
from math import comb

import numpy as np

from .arith import is_prime, legendre_table, p_adic_valuation, primes_between
from .errors import BudgetExceeded, DomainError

ENUMERATION_BUDGET = 2**24
CORPUS_SIZE = 500
CORPUS_SEED = 20140


@dataclass(frozen=True)
class IntPolynomial:
    """Sparse polynomial: exponent tuple -> nonzero integer coefficient."""

    variables: int
    terms: dict = field(hash=False)

    def __post_init__(self):
        if self.variables < 1:
            raise DomainError("need at least one variable")
        clean = {}
        for exps, c in self.terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.variables or min(exps) < 0:
                raise DomainError(f"bad exponent vector {exps}")
            c = int(c)
            if c:
                clean[exps] = clean.get(exps, 0) + c
        object.__setattr__(self, "terms", {e: c for e, c in sorted(clean.items()) if c})

    @classmethod
    def constant(cls, c: int, variables: int = 1) -> IntPolynomial:
        return cls(variables, {(0,) * variables: c})

    @classmethod
    def variable(cls, i: int, variables: int) -> IntPolynomial:
        e = [0] * variables
        e[i] = 1
        return cls(variables, {tuple(e): 1})

    @classmethod
    def parse(cls, text: str) -> IntPolynomial:
        return parse_polynomial(text)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self.terms), default=-1)

    @property
    def content(self) -> int:
        return reduce(math.gcd, self.terms.values(), 0)

    @property
    def height(self) -> int:
        return max((abs(c) for c in self.terms.values()), default=0)

    def reduce_mod(self, n: int) -> IntPolynomial:
        return IntPolynomial(self.variables, {e: c % n for e, c in self.terms.items()})

    def __add__(self, other: IntPolynomial) -> IntPolynomial:
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return IntPolynomial(self.variables, out)

    def __neg__(self) -> IntPolynomial:
        return IntPolynomial(self.variables, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: IntPolynomial) -> IntPolynomial:
        return self + (-other)

    def __mul__(self, other) -> IntPolynomial:
        if isinstance(other, int):
            return IntPolynomial(self.variables, {e: c * other for e, c in self.terms.items()})
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return IntPolynomial(self.variables, out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, IntPolynomial) and self.variables == other.variables and self.terms == other.terms

    def __hash__(self):
        return hash((self.variables, tuple(self.terms.items())))

    def __call__(self, *point: int) -> int:
        return sum(c * math.prod(x**k for x, k in zip(point, e)) for e, c in self.terms.items())

    def shift(self, offsets) -> IntPolynomial:
        """f(x_1 + s_1, ..., x_d + s_d)."""
        out: dict = {}
        for e, c in self.terms.items():
            parts = [
                [(j, comb(k, j) * s ** (k - j)) for j in range(k + 1)] for k, s in zip(e, offsets)
            ]
            for combo in itertools.product(*parts):
                coef = c * math.prod(w for _, w in combo)
                if coef:
                    key = tuple(j for j, _ in combo)
                    out[key] = out.get(key, 0) + coef
        return IntPolynomial(self.variables, out)

    def evaluate_grid(self, points: np.ndarray, modulus: int) -> np.ndarray:
        """Values mod ``modulus`` at integer points of shape (n, d); modulus < 2^31."""
        points = np.asarray(points, dtype=np.int64) % modulus
        total = np.zeros(points.shape[0], dtype=np.int64)
        powers: dict = {}

        def power(i, k):
            key = (i, k)
            if key not in powers:
                if k == 0:
                    powers[key] = np.ones(points.shape[0], dtype=np.int64)
                else:
                    powers[key] = power(i, k - 1) * points[:, i] % modulus
            return powers[key]

        for e, c in self.terms.items():
            term = np.full(points.shape[0], c % modulus, dtype=np.int64)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k) % modulus
            total = (total + term) % modulus
        return total

    def __str__(self):
        return format_polynomial(self)


# -- text format --------------------------------------------------------------

_TERM_SPLIT = re.compile(r"(?=[+-])")
_VAR = re.compile(r"^x(\d*)(?:\^(\d+))?$")


def parse_polynomial(text: str) -> IntPolynomial:
    """Parse ``d=2; 3*x1^2*x2 - 4*x2 + 1``. Without a ``d=`` header the
    variable count is the largest index used; bare ``x`` means ``x1``."""
    text = text.strip()
    declared = None
    if ";" in text:
        head, text = text.split(";", 1)
        m = re.fullmatch(r"\s*d\s*=\s*(\d+)\s*", head)
        if not m:
            raise DomainError(f"bad header {head!r}")
        declared = int(m.group(1))
    body = text.replace(" ", "")
    if not body:
        raise DomainError("empty polynomial")
    raw: list[tuple[dict, int]] = []
    top = 0
    for chunk in _TERM_SPLIT.split(body):
        if not chunk:
            continue
        sign = -1 if chunk[0] == "-" else 1
        chunk = chunk.lstrip("+-")
        if not chunk:
            raise DomainError("dangling sign")
        coef = sign
        exps: dict[int, int] = {}
        for factor in chunk.split("*"):
            if factor.isdigit():
                coef *= int(factor)
                continue
            m = _VAR.match(factor)
            if not m:
                raise DomainError(f"cannot parse factor {factor!r}")
            idx = int(m.group(1) or 1)
            if idx < 1:
                raise DomainError("variables are numbered from 1")
            exps[idx] = exps.get(idx, 0) + int(m.group(2) or 1)
            top = max(top, idx)
        raw.append((exps, coef))
    d = declared if declared is not None else max(top, 1)
    if top > d:
        raise DomainError(f"x{top} used but d={d}")
    terms: dict = {}
    for exps, coef in raw:
        key = tuple(exps.get(i + 1, 0) for i in range(d))
        terms[key] = terms.get(key, 0) + coef
    return IntPolynomial(d, terms)


def format_polynomial(f: IntPolynomial) -> str:
    if f.is_zero:
        return f"d={f.variables}; 0"
    pieces = []
    for e, c in sorted(f.terms.items(), key=lambda t: (-sum(t[0]), [-k for k in t[0]])):
        factors = [f"x{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k]
        mag = abs(c)
        body = "*".join(([str(mag)] if mag != 1 or not factors else []) + factors)
        pieces.append(("-" if c < 0 else "+") + " " + body)
    out = " ".join(pieces)
    out = out[2:] if out.startswith("+ ") else "-" + out[2:]
    return f"d={f.variables}; {out}"


# -- counting -----------------------------------------------------------------


def _check_budget(ell: int, r: int, d: int, budget: int):
    if ell ** (r * d) > budget:
        raise BudgetExceeded(f"{ell}^({r}*{d}) exceeds enumeration budget {budget}")


def _cube(side: int, d: int) -> np.ndarray:
    axes = np.meshgrid(*([np.arange(side, dtype=np.int64)] * d), indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=1)


def root_count(f: IntPolynomial, ell: int, r: int = 1, budget: int = ENUMERATION_BUDGET) -> int:
    """rho_f(ell^r) = #{x mod ell^r : f(x) = 0 mod ell^r}.

    Roots are lifted one level at a time from roots at the level below, which
    is exact and avoids scanning the whole grid.
    """
    if not is_prime(ell):
        raise DomainError(f"{ell} is not prime")
    if r < 1:
        raise DomainError("level must be >= 1")
    d = f.variables
    _check_budget(ell, r, d, budget)
    steps = _cube(ell, d)
    roots = np.zeros((1, d), dtype=np.int64)
    q = 1
    for _ in range(r):
        cand = (roots[:, None, :] + q * steps[None, :, :]).reshape(-1, d)
        q *= ell
        roots = cand[f.evaluate_grid(cand, q) == 0]
        if not len(roots):
            return 0
    return int(len(roots))


def root_count_grid(f: IntPolynomial, ell: int, r: int = 1, budget: int = ENUMERATION_BUDGET) -> int:
    """Same count by scanning every point of (Z/ell^r)^d."""
    d = f.variables
    _check_budget(ell, r, d, budget)
    q = ell**r
    return int(np.count_nonzero(f.evaluate_grid(_cube(q, d), q) == 0))


def character_sum(f: IntPolynomial, ell: int, budget: int = ENUMERATION_BUDGET) -> int:
    """Sum over (Z/ell)^d of the Legendre symbol of f."""
    if ell == 2 or not is_prime(ell):
        raise DomainError("need an odd prime")
    _check_budget(ell, 1, f.variables, budget)
    chi = legendre_table(ell)
    values = f.evaluate_grid(_cube(ell, f.variables), ell)
    return int(chi[values].sum())


def character_sum_ratio(f: IntPolynomial, ell: int) -> float:
    """|S| / ell^(d - 1/2); reported only, since no explicit constant is known for d >= 2."""
    return abs(character_sum(f, ell)) / ell ** (f.variables - 0.5)


def rho_bound_a(f: IntPolynomial, ell: int) -> int:
    """d m ell^(d-1)."""
    return f.variables * max(f.degree, 0) * ell ** (f.variables - 1)


def rho_bound_b(f: IntPolynomial, ell: int, r: int) -> float:
    """m^d (r+1)^(d-1) ell^(v/m + r(d - 1/m)), v = min(r, nu_ell(content))."""
    m, d = f.degree, f.variables
    if m < 1:
        raise DomainError("bound needs degree >= 1")
    v = min(r, p_adic_valuation(f.content, ell)) if f.content else r
    return m**d * (r + 1) ** (d - 1) * ell ** (v / m + r * (d - 1 / m))


# -- square forms -------------------------------------------------------------


@dataclass(frozen=True)
class SquareForm:
    """f = c g^2 mod ell, c a unit, coefficients of g reduced to [0, ell)."""

    c: int
    g: IntPolynomial
    shift: tuple


def _mod_terms(f: IntPolynomial, ell: int) -> dict:
    return {e: c % ell for e, c in f.terms.items() if c % ell}


def _square_root_from_lowest(terms: dict, d: int, ell: int):
    """g with g^2 = terms mod ell and lowest (lex) coefficient 1, or None.

    With a_e the lowest monomial of g, the coefficient of x^(e+i) in g^2 is
    2 a_e a_i plus products of monomials strictly between e and i, so each
    a_i is forced in increasing lex order. Leading-constant normalization at a
    nonzero origin is the special case e = 0.
    """
    low = min(terms)
    if any(k % 2 for k in low):
        return None
    inv_low = pow(terms[low], -1, ell)
    target = {k: v * inv_low % ell for k, v in terms.items()}
    e = tuple(k // 2 for k in low)
    top = [max(k[i] for k in terms) // 2 for i in range(d)]
    if any(t < x for t, x in zip(top, e)):
        return None
    box = sorted(i for i in itertools.product(*[range(t + 1) for t in top]) if i >= e)
    inv2 = pow(2, -1, ell)
    a: dict = {e: 1}
    done = [e]
    for i in box[1:]:
        k = tuple(x + y for x, y in zip(e, i))
        acc = target.get(k, 0)
        for j in done[1:]:
            jj = tuple(x - y for x, y in zip(k, j))
            if jj in a and jj != e:
                acc -= a.get(j, 0) * a[jj]
        val = acc * inv2 % ell
        if val:
            a[i] = val
        done.append(i)
    g = IntPolynomial(d, a)
    sq = _mod_terms(g * g, ell)
    return g if sq == target else None


def square_form_test(f: IntPolynomial, ell: int) -> SquareForm | None:
    """Return (c, g) with f = c g^2 mod ell, or None when f is not a square form.

    The polynomial is first shifted so that its value at the origin is a unit,
    trying shifts in [0, m]^d; the normalized square root is then forced
    coefficient by coefficient and verified by re-expansion.
    """
    if ell == 2 or not is_prime(ell):
        raise DomainError("need an odd prime")
    d = f.variables
    if not _mod_terms(f, ell):
        raise DomainError("polynomial vanishes mod ell")
    m = max(f.degree, 0)
    shift = None
    for s in itertools.product(range(min(m, ell - 1) + 1), repeat=d):
        if f(*s) % ell:
            shift = s
            break
    if shift is None:
        # f vanishes on the whole box (possible only when ell <= m)
        shift = (0,) * d
    shifted = f.shift(shift)
    terms = _mod_terms(shifted, ell)
    g = _square_root_from_lowest(terms, d, ell)
    if g is None:
        return None
    c = terms[min(terms)]
    g = g.shift(tuple(-x for x in shift)).reduce_mod(ell)
    out = SquareForm(c, g, shift)
    if not verify_square_form(f, ell, out):
        raise RuntimeError("square form failed re-expansion")
    return out


def verify_square_form(f: IntPolynomial, ell: int, sf: SquareForm) -> bool:
    return _mod_terms(sf.g * sf.g * sf.c - f, ell) == {}


def exhaustive_square_form(f: IntPolynomial, ell: int) -> bool:
    """Univariate brute force: does some c, monic-free g over F_ell give f = c g^2?"""
    if f.variables != 1:
        raise DomainError("exhaustive search is univariate")
    target = _mod_terms(f, ell)
    deg = max(k[0] for k in target)
    if deg % 2:
        return False
    half = deg // 2
    for c in range(1, ell):
        # leading coefficient of g fixed to 1 up to the choice of c
        for lower in itertools.product(range(ell), repeat=half):
            g = IntPolynomial(1, {(i,): v for i, v in enumerate(lower)} | {(half,): 1})
            if _mod_terms(g * g * c, ell) == target:
                return True
    return False


# -- corpus and property sweeps -----------------------------------------------


def random_polynomial(rng: np.random.Generator, d: int, m: int, height: int = 20, square: bool = False) -> IntPolynomial:
    if square:
        half = max(1, m // 2)
        g = random_polynomial(rng, d, half, height=5)
        return g * g * int(rng.integers(1, height + 1))
    monomials = [e for e in itertools.product(range(m + 1), repeat=d) if sum(e) <= m]
    top = [e for e in monomials if sum(e) == m]
    n_terms = int(rng.integers(1, min(len(monomials), 6) + 1))
    picks = {top[int(rng.integers(len(top)))]}
    for idx in rng.choice(len(monomials), size=n_terms, replace=False):
        picks.add(monomials[int(idx)])
    terms = {}
    for e in picks:
        c = 0
        while c == 0:
            c = int(rng.integers(-height, height + 1))
        terms[e] = c
    return IntPolynomial(d, terms)


def corpus(size: int = CORPUS_SIZE, seed: int = CORPUS_SEED) -> list[IntPolynomial]:
    """Seeded mix of univariate and multivariate polynomials, one in eight a planted c g^2."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(size):
        d = (1, 1, 2, 3)[i % 4]
        m = int(rng.integers(1, 7 if d == 1 else 5))
        out.append(random_polynomial(rng, d, m, square=(i % 8 == 7)))
    return out


@dataclass
class PropertyReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def weil_check(polys, max_ell: int = 199) -> PropertyReport:
    """|S| <= (m - 1) sqrt(ell) for univariate non-square-forms of degree <= 6."""
    rep = PropertyReport("weil")
    for f in polys:
        if f.variables != 1 or not 1 <= f.degree <= 6:
            continue
        for ell in primes_between(3, max_ell):
            if not _mod_terms(f, ell) or square_form_test(f, ell) is not None:
                continue
            s = character_sum(f, ell)
            rep.checked += 1
            if abs(s) > (f.degree - 1) * math.sqrt(ell) + 1e-9:
                rep.violations.append((str(f), ell, s))
    return rep


def rho_a_check(polys, max_d: int = 3, max_ell: int = 31) -> PropertyReport:
    rep = PropertyReport("rho_bound_a")
    for f in polys:
        if f.variables > max_d:
            continue
        for ell in primes_between(2, max_ell):
            if not _mod_terms(f, ell):
                continue
            rho = root_count(f, ell, 1)
            rep.checked += 1
            if rho > rho_bound_a(f, ell):
                rep.violations.append((str(f), ell, rho))
    return rep


def rho_b_check(polys, max_d: int = 2, max_r: int = 6, max_ell: int = 13,
                budget: int = ENUMERATION_BUDGET) -> PropertyReport:
    """Levels beyond the enumeration budget are skipped and counted in notes."""
    rep = PropertyReport("rho_bound_b")
    skipped = 0
    for f in polys:
        if f.variables > max_d or f.degree < 1:
            continue
        for ell in primes_between(2, max_ell):
            for r in range(1, max_r + 1):
                if ell ** (r * f.variables) > budget:
                    skipped += max_r - r + 1
                    break
                rho = root_count(f, ell, r, budget)
                rep.checked += 1
                if rho > rho_bound_b(f, ell, r) * (1 + 1e-12):
                    rep.violations.append((str(f), ell, r, rho))
    rep.notes["skipped_over_budget"] = skipped
    return rep


def square_form_roundtrip(polys, ells=(3, 5, 7, 11, 13)) -> PropertyReport:
    """Every positive square_form_test answer re-expands to f mod ell."""
    rep = PropertyReport("square_form_soundness")
    positives = 0
    for f in polys:
        for ell in ells:
            if not _mod_terms(f, ell):
                continue
            sf = square_form_test(f, ell)
            rep.checked += 1
            if sf is not None:
                positives += 1
                if not verify_square_form(f, ell, sf):
                    rep.violations.append((str(f), ell))
    rep.notes["positives"] = positives
    return rep
