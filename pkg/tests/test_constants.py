import math
from fractions import Fraction

import numpy as np
import pytest

from ecstats.arith import first_primes, primes_up_to
from ecstats.constants import (
    ConstantKind,
    aliquot_archimedean_factor,
    aliquot_level_value,
    aliquot_local_sequence,
    constant,
    cyclic_closed_form,
    local_factor,
    parks_factor,
    simplex_integral,
    simplex_integral_with_error,
)
from ecstats.errors import BudgetExceeded, DomainError
from ecstats.matcount import MatrixConstraint, count_constrained
from ecstats.arith import PrimePower
from oracles import naive_matrix_table


def _gl_table(q, ell):
    return {k: v for k, v in naive_matrix_table(q).items() if k[1] % ell}


@pytest.mark.parametrize(
    "kind, ell, expected",
    [
        (ConstantKind.lt(0), 2, Fraction(4, 3)),
        (ConstantKind.cyclic(7), 5, Fraction(1)),
        (ConstantKind.twin(), 2, Fraction(2, 3)),
    ],
)
def test_local_factor_examples(kind, ell, expected):
    assert local_factor(kind, ell) == expected


def test_lt_factor_from_enumeration():
    for ell in (2, 3, 5, 7):
        tab = _gl_table(ell, ell)
        for t in range(ell):
            count = sum(c for (tr, _), c in tab.items() if tr == t)
            assert local_factor(ConstantKind.lt(t), ell) == Fraction(ell * count, sum(tab.values()))


def test_lt_generic_closed_form():
    # ell not dividing t: 1 - (ell + 1)^-1 ... equivalently ell (ell^2 - ell - 1) / ((ell - 1)(ell^2 - 1))
    for ell in primes_up_to(200)[2:]:
        expected = Fraction(ell * (ell * ell - ell - 1), (ell - 1) * (ell * ell - 1))
        assert local_factor(ConstantKind.lt(1), ell) == expected
        assert local_factor(ConstantKind.lt(0), ell) == Fraction(ell * ell, ell * ell - 1)


def test_twin_and_gm_from_enumeration():
    for ell in (2, 3, 5, 7):
        tab = _gl_table(ell, ell)
        gl = sum(tab.values())
        bad = sum(c for (tr, det), c in tab.items() if (det + 1 - tr) % ell == 0)
        assert local_factor(ConstantKind.twin(), ell) == Fraction(ell, ell - 1) * Fraction(gl - bad, gl)
        for p in (11, 13, 101):
            if p % ell == 0:
                continue
            fiber = {k: v for k, v in tab.items() if k[1] == p % ell}
            good = sum(c for (tr, det), c in fiber.items() if (det + 1 - tr) % ell)
            expected = Fraction(ell, ell - 1) * Fraction(good, sum(fiber.values()))
            assert local_factor(ConstantKind.gm(p), ell) == expected


def test_men_factor_from_enumeration():
    # ell^r #{sigma in GL_2 : det + 1 - tr = N} / |GL_2| at two levels past nu_ell(N)
    for N, ell in [(12, 2), (12, 3), (10, 2), (9, 3), (8, 2)]:
        from ecstats.arith import p_adic_valuation

        r = p_adic_valuation(N, ell) + 1
        vals = []
        for s in (r, r + 1):
            q = ell**s
            tab = _gl_table(q, ell)
            hit = sum(c for (tr, det), c in tab.items() if (det + 1 - tr - N) % q == 0)
            vals.append(Fraction(q * hit, sum(tab.values())))
        assert local_factor(ConstantKind.men(N), ell) == vals[-1]


def test_meg_factor_matches_enumeration():
    # m = 2: sigma = I mod 2 but not mod 4
    m, k, ell = 2, 3, 2
    N = m * m * k
    q = 16
    e = np.arange(q)
    A, B, C, D = np.meshgrid(e, e, e, e, indexing="ij", sparse=True)
    det = (A * D - B * C) % q
    tr = (A + D) % q
    shift = (det + 1 - tr - N) % q == 0
    i2 = ((A - 1) % 2 == 0) & (B % 2 == 0) & (C % 2 == 0) & ((D - 1) % 2 == 0)
    i4 = ((A - 1) % 4 == 0) & (B % 4 == 0) & (C % 4 == 0) & ((D - 1) % 4 == 0)
    cnt = int(np.count_nonzero(shift & i2 & ~i4 & (det % 2 == 1)))
    from ecstats.matcount import gl2_order

    assert local_factor(ConstantKind.meg(m, k), ell) == Fraction(q * cnt, gl2_order(2, 4))


def test_kind_validation():
    with pytest.raises(DomainError):
        ConstantKind.meg(2, 1)
    with pytest.raises(DomainError):
        ConstantKind.gm(12)
    with pytest.raises(DomainError):
        ConstantKind("BOGUS")


def test_cyclic_constant_example():
    c = constant(ConstantKind.cyclic(7))
    assert c.exact_prefix == Fraction(115, 144)
    assert c.value == pytest.approx(115 / 144)


def test_cyclic_two_routes_first_fifty_primes():
    for p in first_primes(50):
        direct = Fraction(1)
        for ell, _ in __import__("ecstats.arith", fromlist=["factorize"]).factorize(p - 1):
            level = PrimePower(ell, 1)
            good = count_constrained(MatrixConstraint(det=p, not_congruent_to_identity_mod=1, invertible_only=True), level).count
            total = count_constrained(MatrixConstraint(det=p, invertible_only=True), level).count
            direct *= Fraction(good, total)
        assert direct == cyclic_closed_form(p)
        assert constant(ConstantKind.cyclic(p)).exact_prefix == cyclic_closed_form(p)


def test_empty_product_leaves_archimedean_factor():
    assert constant(ConstantKind.lt(0), 1).value == pytest.approx(2 / math.pi)


def test_twin_at_two():
    c = constant(ConstantKind.twin(), 2)
    assert c.value == pytest.approx(2 / 3)
    assert c.exact_prefix == Fraction(2, 3)


def test_truncated_product_structure():
    c = constant(ConstantKind.lt(1), 10**4)
    assert c.partials and c.partials[-1] == (10**4, c.value)
    assert [z for z, _ in c.partials] == [100, 1000, 10**4]
    assert c.tail_estimate >= 0
    generic = 1.0
    for ell in primes_up_to(10**4):
        if ell not in ConstantKind.lt(1).bad_primes():
            generic *= float(local_factor(ConstantKind.lt(1), ell))
    assert c.value == pytest.approx(2 / math.pi * float(c.exact_prefix) * generic, rel=1e-12)


def test_generic_factor_decay():
    kinds = [ConstantKind.lt(0), ConstantKind.lt(1), ConstantKind.lt(2), ConstantKind.twin(),
             ConstantKind.gm(11), ConstantKind.men(12), ConstantKind.meg(2, 3)]
    for kind in kinds:
        for ell in primes_up_to(1000):
            if ell in kind.bad_primes():
                continue
            assert abs(local_factor(kind, ell) - 1) <= Fraction(8) / ell**1.5, (kind, ell)


def test_generic_factor_decay_aliquot():
    kind = ConstantKind.aliquot(2)
    for ell in primes_up_to(200):
        if ell not in kind.bad_primes():
            assert abs(float(local_factor(kind, ell)) - 1) <= 8 / ell**1.5


def test_aliquot_level_zero():
    seq = aliquot_local_sequence(2, 2, 0)
    assert seq.limit == 1 and seq.values == ()


@pytest.mark.parametrize("ell, r_max, target", [(2, 6, Fraction(4, 9)), (3, 5, Fraction(765, 1024))])
def test_aliquot_limits(ell, r_max, target):
    seq = aliquot_local_sequence(ell, 2, r_max)
    assert len(seq.values) == r_max
    assert abs(seq.limit - target) < Fraction(1, 1000)
    assert parks_factor(ell) == target


def test_aliquot_level_value_from_enumeration():
    # pairs (s1, s2) in GL_2(F_ell)^2 with #E condition det + 1 - tr chained cyclically
    for ell in (2, 3):
        tab = _gl_table(ell, ell)
        gl = sum(tab.values())
        pairs = 0
        for (t1, d1), c1 in tab.items():
            for (t2, d2), c2 in tab.items():
                if (d1 + 1 - t1 - d2) % ell == 0 and (d2 + 1 - t2 - d1) % ell == 0:
                    pairs += c1 * c2
        assert aliquot_level_value(ell, 2, 1) == Fraction(ell**2 * pairs, gl * gl)


def test_aliquot_budget():
    with pytest.raises(BudgetExceeded):
        aliquot_local_sequence(7, 3, 6)


def test_simplex_integrals():
    assert simplex_integral(2, 0) == pytest.approx(4.0, abs=1e-10)
    assert simplex_integral(2, 1) == pytest.approx(math.pi, abs=1e-8)
    assert simplex_integral(3, 0) == pytest.approx(12.0, abs=1e-8)
    assert aliquot_archimedean_factor(2) == pytest.approx(16 / (3 * math.pi**2), abs=1e-8)


def test_simplex_integral_monte_carlo_range():
    # |t1 + t2 + t3| <= 1 inside the cube: volume 16/3, times 2^3
    value, err = simplex_integral_with_error(4, 0)
    assert abs(value - 128 / 3) < max(5 * err, 1e-3)


def test_simplex_integral_validation():
    with pytest.raises(DomainError):
        simplex_integral(7, 0)
    with pytest.raises(DomainError):
        simplex_integral(3, 4)


def test_aliquot_constant_runs():
    c = constant(ConstantKind.aliquot(2), 10**4)
    assert c.metadata.get("effective_cutoff") == 400
    assert 0 < c.value < 1


def test_simplex_three_dimensional_against_sampling():
    rng = np.random.default_rng(7)
    n = 2 * 10**6
    t = rng.uniform(-1, 1, (n, 2))
    last = -t.sum(axis=1)
    f = np.sqrt(1 - t[:, 0] ** 2) * np.sqrt(1 - t[:, 1] ** 2) * np.sqrt(np.clip(1 - last**2, 0, None))
    f *= np.abs(last) <= 1
    est, err = 16 * f.mean(), 16 * f.std() / math.sqrt(n)
    assert abs(simplex_integral(3, 3) - est) < 5 * err
