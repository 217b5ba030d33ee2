import math

import pytest
from hypothesis import given, strategies as st

from ecstats.arith import (
    PrimePower,
    divisors,
    euler_phi,
    factorize,
    first_primes,
    is_discriminant,
    is_prime,
    kronecker_symbol,
    legendre_table,
    mobius,
    p_adic_valuation,
    primes_between,
    primes_up_to,
    square_divisors,
)
from oracles import euler_legendre, naive_is_prime, trial_factor


@pytest.mark.parametrize("D, n, expected", [(5, 1, 1), (12, 2, 0), (-4, 3, -1)])
def test_kronecker_examples(D, n, expected):
    assert kronecker_symbol(D, n) == expected


def test_kronecker_at_zero():
    assert kronecker_symbol(1, 0) == 1
    assert kronecker_symbol(-1, 0) == 1
    assert kronecker_symbol(2, 0) == 0


@pytest.mark.parametrize("D, expected", [(0, 0), (1, 1), (7, 1), (3, -1), (5, -1), (-3, -1), (-7, 1)])
def test_kronecker_at_two(D, expected):
    assert kronecker_symbol(D, 2) == expected


@given(st.integers(-500, 500), st.integers(1, 100), st.integers(1, 100))
def test_kronecker_multiplicative(D, m, n):
    assert kronecker_symbol(D, m * n) == kronecker_symbol(D, m) * kronecker_symbol(D, n)


@pytest.mark.parametrize("ell", [p for p in range(3, 98) if naive_is_prime(p)])
def test_kronecker_matches_residuosity(ell):
    squares = {x * x % ell for x in range(ell)}
    for D in range(-60, 61):
        if D % ell == 0:
            continue
        assert (kronecker_symbol(D, ell) == 1) == (D % ell in squares)
        assert kronecker_symbol(D, ell) == euler_legendre(D, ell)


def test_legendre_table():
    tab = legendre_table(7)
    assert [int(v) for v in tab] == [euler_legendre(a, 7) for a in range(7)]


@pytest.mark.parametrize("n, ell, expected", [(48, 2, 4), (7, 3, 0), (-16, 2, 4)])
def test_valuation_examples(n, ell, expected):
    assert p_adic_valuation(n, ell) == expected


def test_valuation_rejects_zero():
    with pytest.raises(ValueError):
        p_adic_valuation(0, 2)


@pytest.mark.parametrize("n, expected", [(60, [(2, 2), (3, 1), (5, 1)]), (1, []), (97, [(97, 1)])])
def test_factorize_examples(n, expected):
    assert list(factorize(n)) == expected


def test_factorize_roundtrip_to_million():
    for n in range(1, 10**6 + 1):
        f = factorize(n).factors
        assert math.prod(p**e for p, e in f) == n
    for n in range(1, 10**6 + 1, 997):
        assert dict(factorize(n)) == trial_factor(n)


def test_factorize_large_semiprime():
    p, q = 1000003, 998244353
    assert list(factorize(p * q)) == [(p, 1), (q, 1)]
    n = (2**31 - 1) * (2**31 + 11)
    assert math.prod(a**e for a, e in factorize(n)) == n


@given(st.integers(2, 10**5))
def test_is_prime_matches_trial_division(n):
    assert is_prime(n) == naive_is_prime(n)


def test_prime_lists():
    assert primes_up_to(30) == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert primes_between(10, 20) == [11, 13, 17, 19]
    assert first_primes(5) == [2, 3, 5, 7, 11]
    assert len(first_primes(50)) == 50 and first_primes(50)[-1] == 229


def test_prime_power():
    pp = PrimePower(3, 4)
    assert pp.value == 81
    with pytest.raises(ValueError):
        PrimePower(4, 1)


@given(st.integers(1, 5000))
def test_divisor_functions(n):
    ds = divisors(n)
    assert ds == [d for d in range(1, n + 1) if n % d == 0]
    assert square_divisors(n) == [d for d in range(1, math.isqrt(n) + 1) if n % (d * d) == 0]
    assert euler_phi(n) == sum(1 for k in range(1, n + 1) if math.gcd(k, n) == 1)
    assert sum(mobius(d) for d in ds) == (1 if n == 1 else 0)


def test_is_discriminant():
    assert is_discriminant(-3) and is_discriminant(-4) and not is_discriminant(-5)
