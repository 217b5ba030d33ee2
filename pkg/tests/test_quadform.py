import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from ecstats.arith import primes_between
from ecstats.quadform import (
    Discriminant,
    QuadraticForm,
    class_number,
    cnf_partial_product,
    is_fundamental,
    kronecker_class_number,
    prime_power_sqrt_count,
    reduced_primitive_forms,
    sqrt_count,
    sqrt_count_enum,
    sqrt_count_table,
    unit_count,
)
from oracles import naive_forms, naive_hurwitz


def brute_sqrt_count(D, m):
    return sum(1 for x in range(2 * m) if (x * x - D) % (4 * m) == 0)


@pytest.mark.parametrize("D, m, expected", [(-2, 1, 0), (-4, 1, 1), (-4, 3, 0)])
def test_sqrt_count_examples(D, m, expected):
    assert sqrt_count(D, m) == expected


@pytest.mark.parametrize("D", [-3, -4, -7, -8, -15, -20, -23, -48, -99, -400])
def test_prime_power_path_matches_enumeration(D):
    for ell in (2, 3, 5, 7):
        for j in range(0, 7):
            assert prime_power_sqrt_count(D, ell, j) == brute_sqrt_count(D, ell**j)


def test_large_modulus_uses_lifting():
    # 4m > 10^6 goes through the factorized path
    D, m = -4 * 7**3, 3**7 * 5**4
    expected = sqrt_count_enum(D, 3**7) * sqrt_count_enum(D, 5**4)
    assert sqrt_count(D, m) == expected


def test_sqrt_count_table():
    tab = sqrt_count_table(3, 2)
    for D in range(-72, 0):
        assert tab[D % 36] == brute_sqrt_count(D, 9)


@given(st.integers(-200, -1), st.integers(1, 40), st.integers(1, 40))
def test_sqrt_count_multiplicative(D, m, n):
    assume(D % 4 in (0, 1) and math.gcd(m, n) == 1 and m * n <= 500)
    assert sqrt_count(D, m * n) == sqrt_count(D, m) * sqrt_count(D, n)


def test_sqrt_count_stabilizes():
    for D in range(-400, 0):
        if D % 4 not in (0, 1):
            continue
        for ell in primes_between(2, 13):
            nu = 0
            while D % ell ** (nu + 1) == 0:
                nu += 1
            stable = sqrt_count(D, ell ** (nu + 1))
            for j in range(nu + 1, 9):
                assert sqrt_count(D, ell**j) == stable


@pytest.mark.parametrize(
    "D, forms",
    [(-3, [(1, 1, 1)]), (-4, [(1, 0, 1)]), (-23, [(1, 1, 6), (2, -1, 3), (2, 1, 3)])],
)
def test_reduced_forms_examples(D, forms):
    got = sorted((f.a, f.b, f.c) for f in reduced_primitive_forms(D))
    assert got == sorted(forms)


def test_reduced_forms_match_naive_scan():
    for D in range(-2000, 0):
        if D % 4 not in (0, 1):
            continue
        got = sorted((f.a, f.b, f.c) for f in reduced_primitive_forms(D))
        assert got == naive_forms(D)
        res = class_number(D)
        assert res.h == len(res.forms) and all(f.is_reduced() for f in res.forms)
        assert all(f.discriminant == D for f in res.forms)


def test_unit_counts():
    assert unit_count(-3) == 6 and unit_count(-4) == 4 and unit_count(-7) == 2


@pytest.mark.parametrize("D, expected", [(-3, Fraction(1, 6)), (-4, Fraction(1, 4)), (-16, Fraction(3, 4))])
def test_hurwitz_examples(D, expected):
    assert kronecker_class_number(D) == expected


def test_hurwitz_matches_naive_sum():
    for D in range(-1500, 0):
        if D % 4 in (0, 1):
            assert kronecker_class_number(D) == naive_hurwitz(D)


@pytest.mark.parametrize("D", [0, 5, -1, -2, -5])
def test_hurwitz_rejects_non_discriminants(D):
    with pytest.raises(ValueError):
        kronecker_class_number(D)
    with pytest.raises(ValueError):
        Discriminant(D)


def test_hurwitz_equals_h_over_w_for_fundamental():
    for D in range(-3000, 0):
        if D % 4 in (0, 1) and is_fundamental(D):
            res = class_number(D)
            assert kronecker_class_number(D) == Fraction(res.h, res.w)


def test_hurwitz_mass_formula():
    for p in primes_between(5, 199):
        bound = math.isqrt(4 * p)
        total = sum(kronecker_class_number(t * t - 4 * p) for t in range(-bound, bound + 1) if t * t < 4 * p)
        assert total == p


def test_known_fundamental_discriminants():
    assert is_fundamental(-3) and is_fundamental(-4) and is_fundamental(-20)
    assert not is_fundamental(-12) and not is_fundamental(-16)


def test_quadratic_form_value():
    f = QuadraticForm(2, 1, 3)
    assert f(1, 1) == 6 and f.discriminant == -23


def test_cnf_empty_product():
    assert cnf_partial_product(-4, 1) == pytest.approx(2 / (2 * math.pi))


@pytest.mark.parametrize("D, H", [(-4, 0.25), (-3, 1 / 6)])
def test_cnf_converges(D, H):
    value, partials = cnf_partial_product(D, 10**5, checkpoints=(10**3, 10**4))
    assert abs(value - H) < 0.02
    assert [c for c, _ in partials] == [10**3, 10**4]


def test_cnf_against_hurwitz_for_composite_discriminants():
    # conditional convergence: generous band, reported trajectory on failure
    for D in (-16, -20, -23, -48, -99):
        value, partials = cnf_partial_product(D, 10**5, checkpoints=(10**3, 10**4))
        H = float(kronecker_class_number(D))
        assert abs(value - H) / H < 0.05, partials
