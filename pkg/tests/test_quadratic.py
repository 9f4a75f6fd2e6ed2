"""Field arithmetic in Q(sqrt(d)) cross-checked against 60-digit
floating point, plus the polynomial and fixed-point machinery."""

import random
from fractions import Fraction as F

import mpmath
import pytest

from kakeya4.quadratic import (FieldMismatch, Polynomial, QuadraticNumber,
                               RationalMap, Trajectory, ceil_to_dyadic,
                               exact_sign, format_significant, iterate,
                               solve_quadratic, sqrt_fraction_floor,
                               squarefree_decomposition)

mpmath.mp.dps = 60

RADICANDS = (2, 3, 5, 7, 145)


def rand_q(rng, d):
    a = F(rng.randint(-50, 50), rng.randint(1, 20))
    b = F(rng.randint(-50, 50), rng.randint(1, 20))
    return QuadraticNumber(a, b, d)


def as_mpf(x: QuadraticNumber):
    return (mpmath.mpf(x.rational_part.numerator)
            / x.rational_part.denominator
            + mpmath.mpf(x.radical_part.numerator)
            / x.radical_part.denominator
            * mpmath.sqrt(x.radicand if x.radical_part else 0))


# --- decompositions ---------------------------------------------------------


def test_squarefree_decomposition_property():
    for n in list(range(1, 400)) + [1440, 99856, 5 * 7 ** 4]:
        s, k = squarefree_decomposition(n)
        assert k * k * s == n
        for p in range(2, 40):
            assert s % (p * p) != 0, (n, s)


def test_sqrt_fraction_floor_brackets_the_root():
    for d in RADICANDS:
        for digits in (5, 20, 50):
            r = sqrt_fraction_floor(d, digits)
            assert r * r <= d
            step = F(1, 10 ** digits)
            assert (r + step) * (r + step) > d


# --- arithmetic against the float oracle ------------------------------------


def test_field_ops_match_high_precision_floats():
    rng = random.Random(11)
    for _ in range(150):
        d = rng.choice(RADICANDS)
        x, y = rand_q(rng, d), rand_q(rng, d)
        fx, fy = as_mpf(x), as_mpf(y)
        pairs = [(x + y, fx + fy), (x - y, fx - fy), (x * y, fx * fy)]
        if y.sign() != 0:
            pairs.append((x / y, fx / fy))
        for got, want in pairs:
            err = abs(as_mpf(got) - want)
            assert err < mpmath.mpf(10) ** -40


def test_comparison_trichotomy_matches_floats():
    rng = random.Random(12)
    for _ in range(300):
        d = rng.choice(RADICANDS)
        x, y = rand_q(rng, d), rand_q(rng, d)
        fx, fy = as_mpf(x), as_mpf(y)
        if abs(fx - fy) < mpmath.mpf(10) ** -45:
            assert x == y
        elif fx < fy:
            assert x < y and not y < x
        else:
            assert y < x and not x < y


def test_exact_zero_detection():
    root2 = QuadraticNumber(0, 1, 2)
    assert (1 + root2) * (1 - root2) + 1 == QuadraticNumber(0)
    assert root2 * root2 == QuadraticNumber(2)
    assert (root2 ** 2).is_rational
    x = QuadraticNumber(F(3, 7), F(-2, 9), 145)
    assert exact_sign(x - x) == 0
    assert bool(x - x) is False


def test_conjugate_and_norm():
    x = QuadraticNumber(F(5, 3), F(1, 4), 7)
    assert x * x.conjugate() == QuadraticNumber(x.norm())
    assert x.norm() == F(25, 9) - F(1, 16) * 7


def test_powers_and_inverse():
    x = QuadraticNumber(1, 1, 5)
    assert x ** 3 == x * x * x
    assert x ** 0 == QuadraticNumber(1)
    assert x ** -2 == 1 / (x * x)
    with pytest.raises(ZeroDivisionError):
        QuadraticNumber(0) ** -1


def test_mixed_radicands_raise():
    with pytest.raises(FieldMismatch):
        QuadraticNumber(0, 1, 2) + QuadraticNumber(0, 1, 3)
    # rational values unify with any field
    assert QuadraticNumber(2, 0, 2) + QuadraticNumber(1, 0, 3) \
        == QuadraticNumber(3)


def test_approximate_is_within_stated_precision():
    rng = random.Random(13)
    for _ in range(60):
        d = rng.choice(RADICANDS)
        x = rand_q(rng, d)
        for digits in (6, 15, 30):
            approx = x.approximate(digits)
            err = abs(mpmath.mpf(approx.numerator) / approx.denominator
                      - as_mpf(x))
            assert err <= mpmath.mpf(10) ** -digits


def test_decimal_rendering_frozen_values():
    assert QuadraticNumber(F(159, 56), F(1, 56), 145).decimal(10) \
        == "3.054314189"
    assert QuadraticNumber(F(75, 40), F(-3, 40), 145).decimal(10) \
        == "0.9718804066"
    assert QuadraticNumber(F(1, 2)).decimal(3) == "0.500"


def test_format_significant_cases():
    assert format_significant(F(702, 251), 10) == "2.796812749"
    assert format_significant(F(101, 251), 10) == "0.4023904382"
    assert format_significant(F(-1, 3), 4) == "-0.3333"
    assert format_significant(F(999999, 1000), 3) == "1000"
    assert format_significant(F(25, 10), 1) == "2"  # half-even tie
    assert format_significant(F(0), 5) == "0"
    with pytest.raises(ValueError):
        format_significant(F(1), 0)


def test_str_forms():
    assert str(QuadraticNumber(F(15, 8), F(-3, 40), 145)) \
        == "15/8 - 3/40*sqrt(145)"
    assert str(QuadraticNumber(F(2, 3))) == "2/3"
    assert str(QuadraticNumber(0, 1, 5)) == "sqrt(5)"


# --- polynomials ------------------------------------------------------------


def test_polynomial_trims_and_evaluates():
    p = Polynomial([54, -75, 20, 0, 0])
    assert p.degree == 2
    assert p(F(1)) == -1
    assert p(2) == 54 - 150 + 80
    root = QuadraticNumber(F(75, 40), F(-3, 40), 145)
    assert p(root) == QuadraticNumber(0)


def test_polynomial_divmod_property():
    rng = random.Random(14)
    for _ in range(80):
        a = Polynomial([F(rng.randint(-9, 9), rng.randint(1, 4))
                        for _ in range(rng.randint(1, 6))])
        b = Polynomial([F(rng.randint(-9, 9), rng.randint(1, 4))
                        for _ in range(rng.randint(1, 4))])
        if b.is_zero:
            continue
        q, r = a.divmod(b)
        assert (b * q) - (a - r) == Polynomial([])
        assert r.is_zero or r.degree < b.degree


def test_polynomial_gcd_of_common_factor():
    shared = Polynomial([-1, 1])            # x - 1
    a = shared * Polynomial([-2, 1])        # (x-1)(x-2)
    b = shared * Polynomial([-3, 1])        # (x-1)(x-3)
    g = a.gcd(b).monic()
    assert g == shared


def test_solve_quadratic_irrational_and_rational_roots():
    disc, roots = solve_quadratic(Polynomial([54, -75, 20]))
    assert disc == 75 * 75 - 4 * 20 * 54 == 1305
    assert len(roots) == 2
    lo, hi = roots
    assert lo == QuadraticNumber(F(75, 40), F(-3, 40), 145)
    assert hi == QuadraticNumber(F(75, 40), F(3, 40), 145)
    disc2, roots2 = solve_quadratic(Polynomial([2, -3, 1]))
    assert [r.as_fraction() for r in roots2] == [1, 2]
    assert solve_quadratic(Polynomial([1, 0, 1]))[1] == ()   # no real roots
    with pytest.raises(ValueError):
        solve_quadratic(Polynomial([1, 0, 0, 1]))


# --- rational maps and iteration ---------------------------------------------


def test_rational_map_evaluation_and_poles():
    m = RationalMap([54, 33, -34], [108, -54])
    assert m(F(1)) == F(53, 54)
    with pytest.raises(ZeroDivisionError):
        m(F(2))    # 108 - 54*2 == 0


def test_fixed_points_report():
    m = RationalMap([54, 33, -34], [108, -54])
    report = m.fixed_points()
    # cleared is proportional to 20a^2 - 75a + 54
    c = report.cleared.coeffs
    scale = c[2] / 20
    assert [x / scale for x in c] == [54, -75, 20]
    assert len(report.fixed_points) == 2
    for r in report.fixed_points:
        assert m(r) == r
    assert report.poles_excluded == ()


def test_fixed_points_identity_map_is_everywhere_fixed():
    report = RationalMap([0, 1], [1]).fixed_points()
    assert report.everywhere_fixed


def test_ceil_to_dyadic():
    rng = random.Random(15)
    for _ in range(200):
        x = F(rng.randint(-10 ** 9, 10 ** 9), rng.randint(1, 10 ** 6))
        bits = rng.choice((8, 32, 128))
        out = ceil_to_dyadic(x, bits)
        assert out >= x
        assert (1 << bits) % out.denominator == 0
        assert out - x < F(1, 1 << bits)
        assert ceil_to_dyadic(out, bits) == out


def test_exact_sign_across_kinds():
    assert exact_sign(F(-3, 7)) == -1
    assert exact_sign(0) == 0
    assert exact_sign(QuadraticNumber(F(-3, 2), 1, 2)) == -1  # sqrt2 < 1.5
    assert exact_sign(QuadraticNumber(F(-7, 5), 1, 2)) == 1   # sqrt2 > 1.4


def test_iterate_converges_to_fixed_point():
    m = RationalMap([54, 33, -34], [108, -54])
    star = m.fixed_points().fixed_points[0]
    traj = iterate(m, F(1), tol=F(1, 10 ** 6), fixed_point=star)
    assert traj.converged
    assert traj.monotone_decreasing
    gap = traj.points[-1] - star
    assert exact_sign(gap) > 0 and exact_sign(F(1, 10 ** 6) - gap) > 0


def test_iterate_dyadic_rounding_keeps_monotonicity():
    m = RationalMap([54, 33, -34], [108, -54])
    star = m.fixed_points().fixed_points[0]
    traj = iterate(m, F(1), tol=F(1, 10 ** 6), fixed_point=star,
                   denominator_bits=64, floor=star)
    assert traj.converged and traj.monotone_decreasing
    assert traj.rounded_steps > 0
    for p in traj.points:
        assert p.denominator.bit_length() <= 65


def test_trajectory_serialization():
    t = Trajectory([F(1), F(1, 2)], True, "test stop", 0)
    d = t.to_dict()
    assert d["points"] == ["1", "1/2"]
    assert d["iterations"] == 1 and d["monotone_decreasing"]
