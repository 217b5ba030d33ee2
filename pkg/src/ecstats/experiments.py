"""Prediction-versus-observation runs at desk scale.

Observations are exact rationals built from census tallies or class numbers;
predictions are floats from constants, pi, logs and integrals.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from scipy.integrate import quad

from .arith import PrimePower, factorize, is_prime, primes_between, primes_up_to
from .census import TraceMod, census
from .constants import DEFAULT_Z, ConstantKind, constant
from .density import GroupShape, deuring_mass, schoof_group_mass
from .errors import DomainError
from .matcount import MatrixConstraint, count_crt
from .quadform import kronecker_class_number
from .serialize import parse_number

# p = 2, 3 are outside the short Weierstrass measure; every prime sum starts here
FIRST_PRIME = 5
# shortest Sato-Tate interval considered resolvable at desk scale
MIN_INTERVAL = 0.05


@dataclass
class ComparisonRecord:
    label: str
    predicted: float | Fraction
    observed: float | Fraction
    abs_err: float
    rel_err: float
    metadata: dict = field(default_factory=dict)
    exact_equal: bool | None = None

    @classmethod
    def build(cls, label, predicted, observed, **metadata):
        abs_err = abs(float(observed) - float(predicted))
        rel_err = abs_err / abs(float(predicted)) if predicted else (0.0 if not observed else math.inf)
        exact = None
        if isinstance(predicted, (Fraction, int)) and isinstance(observed, (Fraction, int)):
            exact = Fraction(predicted) == Fraction(observed)
            abs_err = float(abs(Fraction(observed) - Fraction(predicted)))
        return cls(label, predicted, observed, abs_err, rel_err, metadata, exact)

    @property
    def ratio(self) -> float:
        return float(self.observed) / float(self.predicted)

    @classmethod
    def from_json(cls, obj: dict) -> ComparisonRecord:
        """Rebuild from the JSON emitted by ``serialize.dumps``; metadata stays as decoded JSON."""
        return cls(
            label=obj["label"],
            predicted=parse_number(obj["predicted"]),
            observed=parse_number(obj["observed"]),
            abs_err=parse_number(obj["abs_err"]),
            rel_err=parse_number(obj["rel_err"]),
            metadata=obj.get("metadata", {}),
            exact_equal=obj.get("exact_equal"),
        )


@dataclass
class HistogramRecord:
    edges: list[float]
    empirical_masses: list[Fraction]
    semicircle_masses: list[float]
    sup_deviation: float


# -- integrals ----------------------------------------------------------------


def _integrate(f, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    val, _ = quad(f, lo, hi, epsabs=1e-10, epsrel=1e-12, limit=500)
    return val


def lt_integral(x: float, lo: float = 2.0) -> float:
    """integral from lo to x of du / (2 sqrt(u) log u)."""
    return _integrate(lambda u: 1.0 / (2.0 * math.sqrt(u) * math.log(u)), lo, x)


def twin_integral(x: float, lo: float = 2.0) -> float:
    """integral from lo to x of du / log^2 u."""
    return _integrate(lambda u: 1.0 / math.log(u) ** 2, lo, x)


def aliquot_integral(d: int, x: float, lo: float = 2.0) -> float:
    return _integrate(lambda u: 1.0 / (2.0 * math.sqrt(u) * math.log(u) ** d), lo, x)


def semicircle_cdf(u: float) -> float:
    """(2/pi) * integral from -1 to u of sqrt(1 - s^2) ds."""
    u = min(1.0, max(-1.0, u))
    return (u * math.sqrt(1 - u * u) + math.asin(u)) / math.pi + 0.5


# -- helpers ------------------------------------------------------------------


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _lt_terms(args):
    t, p = args
    return deuring_mass(t, p)


def in_hasse_window(p: int, N: int) -> bool:
    """N^- < p < N^+ with N^+- = N +- 2 sqrt(N) + 1, tested in integers."""
    return (p - N - 1) ** 2 < 4 * N


def hasse_window_primes(N: int) -> list[int]:
    hi = N + 1 + math.isqrt(4 * N) + 1
    lo = max(FIRST_PRIME, N + 1 - math.isqrt(4 * N) - 1)
    return [p for p in primes_between(lo, hi) if in_hasse_window(p, N)]


# -- Lang-Trotter average -----------------------------------------------------


def run_lt_average(t: int, x: float, z: int = DEFAULT_Z, workers: int = 1) -> ComparisonRecord:
    """Sum over primes 5 <= p <= x of P(a_p = t) against C_LT(t) times the integral."""
    ps = primes_between(FIRST_PRIME, int(x)) if x >= FIRST_PRIME else []
    observed = sum(_map(_lt_terms, [(t, p) for p in ps], workers), Fraction(0))
    c = constant(ConstantKind.lt(t), z)
    integral = lt_integral(x) if x > 2 else 0.0
    predicted = c.value * integral
    return ComparisonRecord.build(
        "lang_trotter_average", predicted, observed,
        t=t, x=x, z=z, primes=len(ps), constant=c.value, integral=integral,
    )


# -- Sato-Tate ----------------------------------------------------------------


def _normalized_traces(p: int) -> dict[float, int]:
    counts = census(p).counts("trace")
    scale = 2 * math.sqrt(p)
    return {t / scale: c for t, c in counts.items()}


def run_sato_tate(p: int, bins: int | None = 10, interval: tuple[float, float] | None = None):
    """Census traces t / (2 sqrt p) against the semicircle law.

    With ``interval`` a single [alpha, beta] comparison is returned; otherwise
    [-1, 1] is cut into ``bins`` equal bins (the last bin closed).
    """
    if not is_prime(p) or p < FIRST_PRIME:
        raise DomainError("need a prime p >= 5")
    C = census(p)
    total = C.pair_count
    traces = C.counts("trace")
    scale = 2 * math.sqrt(p)
    if interval is not None:
        alpha, beta = interval
        if not -1 <= alpha <= beta <= 1:
            raise DomainError("need -1 <= alpha <= beta <= 1")
        hits = sum(c for t, c in traces.items() if alpha <= t / scale <= beta)
        observed = Fraction(hits, total)
        predicted = semicircle_cdf(beta) - semicircle_cdf(alpha)
        rec = ComparisonRecord.build(
            "sato_tate_interval", predicted, observed, p=p, alpha=alpha, beta=beta,
            below_resolution=(beta - alpha) < MIN_INTERVAL,
        )
        hist = HistogramRecord([alpha, beta], [observed], [predicted], abs(float(observed) - predicted))
        return hist, rec
    if bins is None or bins < 1:
        raise DomainError("bins must be >= 1")
    edges = [-1 + 2 * i / bins for i in range(bins + 1)]
    hits = [0] * bins
    for t, c in traces.items():
        u = t / scale
        idx = min(int((u + 1) * bins / 2), bins - 1)
        hits[idx] += c
    emp = [Fraction(h, total) for h in hits]
    semi = [semicircle_cdf(edges[i + 1]) - semicircle_cdf(edges[i]) for i in range(bins)]
    sup = max(abs(float(e) - s) for e, s in zip(emp, semi))
    hist = HistogramRecord(edges, emp, semi, sup)
    rec = ComparisonRecord.build("sato_tate_histogram", 0.0, sup, p=p, bins=bins, sup_deviation=sup)
    rec.rel_err = sup
    return hist, rec


# -- per-prime comparisons ----------------------------------------------------


def trace_mod_lambda(t: int, N: int, p: int) -> Fraction:
    """Share of GL_2(Z/N) with trace t among matrices with det p."""
    if N == 1:
        return Fraction(1)
    if math.gcd(N, p) != 1:
        raise DomainError("modulus must be coprime to p")
    levels = [PrimePower(q, e) for q, e in factorize(N)]
    hit = count_crt({lv: MatrixConstraint(trace=t, det=p, invertible_only=True) for lv in levels}, N)
    total = count_crt({lv: MatrixConstraint(det=p, invertible_only=True) for lv in levels}, N)
    return Fraction(hit, total)


def deuring_pair_counts(p: int) -> dict[int, tuple[int, Fraction]]:
    """t -> (census pair count, H(t^2 - 4p) (p - 1)) for every Hasse trace."""
    counts = census(p).counts("trace")
    out = {}
    bound = math.isqrt(4 * p)
    for t in range(-bound, bound + 1):
        if t * t < 4 * p:
            out[t] = (counts.get(t, 0), kronecker_class_number(t * t - 4 * p) * (p - 1))
    return out


def run_per_prime(p: int, kind, z: int = DEFAULT_Z):
    """kind is 'koblitz', 'cyclicity', 'deuring_full' or a TraceMod(N, t)."""
    if not is_prime(p) or p < FIRST_PRIME:
        raise DomainError("need a prime p >= 5")
    if kind == "koblitz":
        observed = census(p).distribution("prime_order").mass(True)
        c = constant(ConstantKind.gm(p), z)
        predicted = c.value / math.log(p)
        return ComparisonRecord.build("koblitz", predicted, observed, p=p, z=z, constant=c.value)
    if kind == "cyclicity":
        observed = census(p).distribution("cyclic").mass(True)
        predicted = constant(ConstantKind.cyclic(p)).exact_prefix
        rec = ComparisonRecord.build("cyclicity", predicted, observed, p=p)
        rec.exact_equal = None  # an asymptotic statement; only the error is meaningful
        return rec
    if isinstance(kind, TraceMod):
        observed = census(p).distribution(kind).mass(True)
        predicted = trace_mod_lambda(kind.t, kind.modulus, p)
        rec = ComparisonRecord.build("trace_mod", predicted, observed, p=p, modulus=kind.modulus, t=kind.t)
        if kind.modulus > 1:
            rec.exact_equal = None
        return rec
    if kind == "deuring_full":
        rows = deuring_pair_counts(p)
        total = p * p - p
        diffs = {t: Fraction(c, total) - Fraction(h, total) for t, (c, h) in rows.items()}
        max_err = max(abs(d) for d in diffs.values())
        observed = sum((Fraction(c, total) for c, _ in rows.values()), Fraction(0))
        predicted = sum((Fraction(h, total) for _, h in rows.values()), Fraction(0))
        rec = ComparisonRecord.build("deuring_full", predicted, observed, p=p, max_abs_err=max_err, traces=len(rows))
        rec.exact_equal = max_err == 0
        return rec
    raise DomainError(f"unknown per-prime kind {kind!r}")


# -- sums over primes ---------------------------------------------------------


def run_men(N: int, z: int = DEFAULT_Z) -> ComparisonRecord:
    """Sum over p in the Hasse window of P(#E(F_p) = N) against C(N)/log N."""
    ps = hasse_window_primes(N)
    observed = sum((deuring_mass(p + 1 - N, p) for p in ps), Fraction(0))
    c = constant(ConstantKind.men(N), z)
    return ComparisonRecord.build("men", c.value / math.log(N), observed, N=N, z=z, primes=ps, constant=c.value)


def run_meg(m: int, k: int, z: int = DEFAULT_Z) -> ComparisonRecord:
    """Sum over p of P(E(F_p) = Z/m x Z/mk) against C(G)/log|G|."""
    shape = GroupShape(m, k)
    ps = hasse_window_primes(shape.N)
    observed = sum((schoof_group_mass(shape, p) for p in ps), Fraction(0))
    c = constant(ConstantKind.meg(m, k), z)
    return ComparisonRecord.build(
        "meg", c.value / math.log(shape.N), observed, m=m, k=k, N=shape.N, z=z, primes=ps, constant=c.value
    )


def aliquot_tuples(d: int, lo: int, hi: int):
    """Cycles (p_1..p_d) of distinct primes >= 5 with lo < p_1 <= hi and each
    step |p_(j+1) - p_j - 1| < 2 sqrt(p_j), including the closing step."""
    if d < 2:
        raise DomainError("cycle length must be >= 2")

    def nexts(p):
        return hasse_window_primes_for_trace(p)

    out = []

    def extend(path):
        if len(path) == d:
            if in_step(path[-1], path[0]):
                out.append(tuple(path))
            return
        for q in nexts(path[-1]):
            if q not in path:
                extend(path + [q])

    for p1 in primes_between(max(lo + 1, FIRST_PRIME), hi):
        extend([p1])
    return out


def in_step(p: int, q: int) -> bool:
    """|q - p - 1| < 2 sqrt(p): a curve over F_p can have q points."""
    return (q - p - 1) ** 2 < 4 * p


def hasse_window_primes_for_trace(p: int) -> list[int]:
    r = math.isqrt(4 * p) + 1
    return [q for q in primes_between(max(FIRST_PRIME, p + 1 - r), p + 1 + r) if in_step(p, q)]


def aliquot_weight(cycle) -> Fraction:
    d = len(cycle)
    out = Fraction(1)
    for j in range(d):
        p, q = cycle[j], cycle[(j + 1) % d]
        out *= deuring_mass(p + 1 - q, p)
        if not out:
            break
    return out


def run_aliquot(d: int, x: int, z: int = DEFAULT_Z, dyadic: bool = False) -> ComparisonRecord:
    """Cumulative (p_1 <= x) or dyadic (x < p_1 <= 2x) aliquot-cycle sum."""
    lo, hi = (x, 2 * x) if dyadic else (0, x)
    cycles = aliquot_tuples(d, lo, hi)
    observed = sum((aliquot_weight(c) for c in cycles), Fraction(0))
    c = constant(ConstantKind.aliquot(d), z)
    integral = aliquot_integral(d, hi, max(2.0, lo)) if hi > 2 else 0.0
    label = "aliquot_dyadic" if dyadic else "aliquot_cumulative"
    return ComparisonRecord.build(
        label, c.value * integral, observed, d=d, x=x, z=z, cycles=len(cycles), constant=c.value, integral=integral
    )


def run_sum_over_primes(kind: str, *params, z: int = DEFAULT_Z, dyadic: bool = False) -> ComparisonRecord:
    kind = kind.lower()
    if kind == "men":
        return run_men(*params, z=z)
    if kind == "meg":
        return run_meg(*params, z=z)
    if kind == "aliquot":
        return run_aliquot(*params, z=z, dyadic=dyadic)
    raise DomainError(f"unknown sum kind {kind!r}")


def run_twin_average(x: int, z: int = DEFAULT_Z) -> ComparisonRecord:
    """Sum over 5 <= p <= x of P(#E(F_p) prime) against C_twin times the log^-2 integral.

    Per-prime probabilities come from the exact trace masses, so no census is run.
    """
    observed = sum(
        (
            deuring_mass(p + 1 - q, p)
            for p in primes_between(FIRST_PRIME, x)
            for q in primes_between(2, p + 2 + math.isqrt(4 * p))
        ),
        Fraction(0),
    )
    c = constant(ConstantKind.twin(), z)
    integral = twin_integral(x)
    return ComparisonRecord.build("twin_average", c.value * integral, observed, x=x, z=z, constant=c.value)
