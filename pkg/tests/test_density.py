import math
from fractions import Fraction

import pytest

from ecstats.arith import PrimePower, is_prime, p_adic_valuation, primes_between, primes_up_to
from ecstats.density import (
    GroupShape,
    archimedean_density,
    deuring_mass,
    full_torsion_mass,
    group_local_density,
    hasse_shapes,
    local_density,
    local_density_star,
    schoof_group_mass,
)
from ecstats.errors import DomainError
from ecstats.matcount import bruteforce_table, gl2_order
from ecstats.quadform import kronecker_class_number
from oracles import naive_matrix_table


def test_archimedean_examples():
    assert archimedean_density(0, 5) == pytest.approx(1 / (math.pi * math.sqrt(5)), rel=1e-14)
    assert archimedean_density(5, 5) == 0
    # (1/(pi sqrt 5)) sqrt(1 - 4/20) evaluates to 0.127324
    assert archimedean_density(2, 5) == pytest.approx(math.sqrt(0.8) / (math.pi * math.sqrt(5)), rel=1e-14)
    assert archimedean_density(2, 5) == pytest.approx(0.12732, abs=5e-6)


def test_archimedean_bounds():
    for p in primes_between(5, 199):
        for t in range(-30, 31):
            v = archimedean_density(t, p)
            assert 0 <= v <= 1 / (math.pi * math.sqrt(p))
            if t * t >= 4 * p:
                assert v == 0


def test_gekeler_identity_exact_form():
    for p in primes_between(5, 199):
        bound = math.isqrt(4 * p)
        for t in range(-bound, bound + 1):
            if t * t >= 4 * p:
                continue
            D = t * t - 4 * p
            H = kronecker_class_number(D)
            lhs = archimedean_density(t, p) * 2 * math.pi * float(H) / math.sqrt(-D)
            assert lhs == pytest.approx(float(deuring_mass(t, p)), rel=1e-12)


@pytest.mark.parametrize("t, u, ell, expected", [(0, 1, 3, Fraction(3, 4)), (0, 1, 5, Fraction(5, 4))])
def test_local_density_examples(t, u, ell, expected):
    assert local_density(t, u, 1, ell).value == expected


def test_local_density_from_enumeration():
    # ell^r phi(ell^r) |C| / |GL_2| at r = 1 from 4-fold loops
    for ell in (3, 5):
        tab = naive_matrix_table(ell)
        assert Fraction(ell * (ell - 1) * tab[(0, 1)], gl2_order(ell, 1)) == local_density(0, 1, 1, ell).value


def test_local_density_closed_form_generic_primes():
    # ell not dividing D: (1 - 1/ell^2)^-1 (1 + (D|ell)/ell)
    from ecstats.arith import kronecker_symbol

    for ell in primes_between(3, 60):
        for t, u in [(0, 1), (1, 2), (3, 7), (-2, 5)]:
            D = t * t - 4 * u
            if D % ell == 0 or u % ell == 0:
                continue
            expected = Fraction(1 + Fraction(kronecker_symbol(D, ell), ell)) / (1 - Fraction(1, ell * ell))
            assert local_density(t, u, 1, ell).value == expected


def test_local_density_incompatible_is_zero():
    # u = 2 is not 1 mod 3
    assert local_density(0, 2, 3, 3).value == 0


def test_local_density_rejects_nonunit_det():
    with pytest.raises(DomainError):
        local_density(0, 3, 1, 3)


def test_local_density_is_stable_past_certified_level():
    for ell in (2, 3, 5):
        for t, u in [(0, 1), (2, 5), (4, 7), (6, 9 + 1)]:
            if u % ell == 0:
                continue
            lf = local_density(t, u, 1, ell)
            for r in range(lf.stabilized_at, lf.stabilized_at + 2):
                if ell ** (4 * r) > 2**24:
                    break
                q = ell**r
                cnt = bruteforce_table(ell, r)[t % q, u % q]
                assert Fraction(q * (q - q // ell) * int(cnt), gl2_order(ell, r)) == lf.value


def test_local_density_normalization():
    for ell, r in [(3, 1), (3, 2), (3, 3)]:
        q = ell**r
        for p in (5, 7, 11, 13):
            tab = bruteforce_table(ell, r)
            total = sum(Fraction(q * (q - q // ell) * int(tab[t, p % q]), gl2_order(ell, r)) for t in range(q))
            assert total / q == 1


def test_star_density_examples():
    # ell does not divide t1: second term vanishes
    assert local_density_star(1, 2, 3).value == local_density(1, 2, 1, 3).value
    f200 = local_density(0, 0, 1, 2, require_unit_det=False).value
    assert local_density_star(0, 0, 2).value == f200 - f200 / 2
    expected = local_density(3, 9, 1, 3, require_unit_det=False).value - local_density(1, 1, 1, 3).value / 3
    lf = local_density_star(3, 9, 3)
    assert lf.value == expected


def test_star_density_against_enumeration():
    # direct count of sigma != 0 mod 3 with tr = 3, det = 9 at a stabilized level
    ell, r = 3, 4
    q = ell**r
    import numpy as np

    e = np.arange(q)
    A, B, C, D = np.meshgrid(e, e, e, e, indexing="ij", sparse=True)
    zero = (A % 3 == 0) & (B % 3 == 0) & (C % 3 == 0) & (D % 3 == 0)
    hit = ((A + D) % q == 3) & ((A * D - B * C) % q == 9) & ~zero
    cnt = int(np.count_nonzero(hit))
    assert Fraction(q * (q - q // 3) * cnt, gl2_order(3, r)) == local_density_star(3, 9, 3).value


def test_group_local_density_examples():
    shape = GroupShape(2, 1)
    lf = group_local_density(shape, 7, 2)
    t = 7 + 1 - 4
    assert lf.value == local_density(t, 7, 2, 2).value - local_density(t, 7, 4, 2).value
    assert group_local_density(GroupShape(3, 1), 5, 3).value == 0


def test_group_local_density_generic_prime():
    # ell not dividing D/m^2: the finer density vanishes
    shape = GroupShape(1, 10)
    p, ell = 11, 7
    t = p + 1 - shape.N
    assert (t * t - 4 * p) % ell
    assert group_local_density(shape, p, ell).value == local_density(t, p, 1, ell).value


@pytest.mark.parametrize("t, p, expected", [(2, 5, Fraction(3, 20)), (0, 5, Fraction(1, 5)), (5, 5, 0)])
def test_deuring_examples(t, p, expected):
    assert deuring_mass(t, p) == expected


def test_full_torsion_examples():
    assert full_torsion_mass(2, 2, 5) == Fraction(1, 20)
    assert full_torsion_mass(0, 3, 5) == 0
    for t in range(-4, 5):
        assert full_torsion_mass(t, 1, 5) == deuring_mass(t, 5)


def test_schoof_examples():
    assert schoof_group_mass(GroupShape(2, 1), 5) == Fraction(1, 20)
    assert schoof_group_mass(GroupShape(1, 4), 5) == Fraction(1, 10)
    assert schoof_group_mass(GroupShape(4, 1), 7) == 0  # 4 does not divide 6


def test_shape_masses_partition_one():
    for p in primes_between(5, 97):
        shapes = hasse_shapes(p)
        assert all((p - 1) % s.m == 0 for s in shapes)
        assert sum(schoof_group_mass(s, p) for s in shapes) == 1


def test_deuring_masses_sum_to_one():
    for p in primes_between(5, 199):
        assert sum(deuring_mass(t, p) for t in range(-30, 31)) == 1


def test_group_shape_type():
    s = GroupShape(2, 3)
    assert s.N == 12 and not s.is_cyclic and str(s) == "2,3"
    with pytest.raises(DomainError):
        GroupShape(0, 1)


def test_finite_part_consistency_diagnostic():
    # product of bad-prime local densities times the generic tail approaches 2 pi H / sqrt|D|
    from ecstats.arith import kronecker_symbol

    for p, t in [(11, 1), (13, 3), (17, 2)]:
        D = t * t - 4 * p
        target = 2 * math.pi * float(kronecker_class_number(D)) / math.sqrt(-D)
        value = 1.0
        for ell in primes_up_to(10**5):
            if (2 * D) % ell == 0:
                value *= float(local_density(t, p, 1, ell).value)
            else:
                value *= (1 + kronecker_symbol(D, ell) / ell) / (1 - 1 / ell**2)
        assert abs(value / target - 1) < 0.05
